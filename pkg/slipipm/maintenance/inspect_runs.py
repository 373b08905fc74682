from __future__ import annotations

import sys

import pandas as pd

from slipipm.harness.ledger import runs_frame


def summarize_runs(df: pd.DataFrame) -> pd.DataFrame:
    if df.empty:
        return df
    return (
        df.groupby(["problem", "mode"])
        .agg(
            runs=("id", "count"),
            f_final_min=("f_final", "min"),
            f_final_max=("f_final", "max"),
            rel_stationarity_median=("relative_stationarity", "median"),
            mu_resets=("mu_resets", "sum"),
        )
        .reset_index()
    )


def main():
    problem = sys.argv[1] if len(sys.argv) > 1 else None
    df = runs_frame(problem)
    if df.empty:
        print("No hay ejecuciones registradas" + (f" para {problem}" if problem else ""))
        return
    with pd.option_context("display.max_rows", 200, "display.width", 160):
        print(df.drop(columns=["created_at"]).to_string(index=False))
        print()
        print(summarize_runs(df).to_string(index=False))


if __name__ == "__main__":
    main()
