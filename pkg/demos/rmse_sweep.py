"""A short Monte Carlo sweep over SNR and illuminator count, printed as a table."""

from coopsense.config import load_experiment
from coopsense.harness import ExperimentSpec, run_sweep


def main(trials=5):
    exp = load_experiment()
    spec = ExperimentSpec(exp, snr_db=(-15.0, -10.0, -5.0, 0.0), tbs_count=(2, 3, 4), trials=trials,
                          seed=exp.seed)
    recs = run_sweep(spec)
    print(" I   SNR   loc RMSE (m)   speed RMSE (m/s)   heading RMSE (rad)")
    for r in recs:
        print(f"{r.tbs_count:2d} {r.snr_db:5.1f}   {r.rmse_location:10.4f}   {r.rmse_speed:12.4f}"
              f"   {r.rmse_heading:14.5f}")


if __name__ == "__main__":
    main()
