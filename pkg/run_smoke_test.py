#!/usr/bin/env python3
"""Quick end-to-end check: exp2 on a coarse icosphere must keep the lumped solution nonnegative."""
import sys
import traceback


def main():
    try:
        from surf_rd import ConfigError, check_angle_condition, generate_icosphere
        from surf_rd.cli import execute_run
        from surf_rd.config import MeshSettings, ModelSettings, RunConfig

        if not check_angle_condition(generate_icosphere(2)).passed:
            print("ERROR: level-2 icosphere fails the angle condition", file=sys.stderr)
            return 1
        for method in ("lsfem", "sfem"):
            config = RunConfig(mesh=MeshSettings(level=2), model=ModelSettings(experiment="exp2", method=method))
            outcome = execute_run(config)
            print(f"{outcome.method}: N={outcome.n_nodes} steps={outcome.steps} "
                  f"min={outcome.report.minima[0]:+.3e} status={outcome.status}")
            if method == "lsfem" and outcome.report.minima[0] < -1e-14:
                print("ERROR: lumped scheme produced a negative value", file=sys.stderr)
                return 1
    except ConfigError as e:
        print("CONFIG ERROR:", e, file=sys.stderr)
        return 2
    except Exception as e:
        print("ERROR:", e, file=sys.stderr)
        traceback.print_exc()
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
