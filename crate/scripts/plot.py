#!/usr/bin/env python3
"""Plot d2dsec CSV outputs.

usage: plot.py OUT_DIR [--save DIR]

Draws whatever it finds: reward curves, trajectories, simulator traces,
best-response grids and r0 x tau sweeps.
"""
import argparse
import glob
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def tables(out, name):
    return sorted(glob.glob(os.path.join(out, f"{name}-*.csv")))


def reward_curve(path, ax):
    df = pd.read_csv(path)
    ax.plot(df.r0, df.operator_utility, label="operator utility")
    ax2 = ax.twinx()
    ax2.plot(df.r0, df.effective_participation, "--", color="tab:orange", label="effective participation")
    ax.set_xlabel("r0")
    ax.set_ylabel("utility")
    ax2.set_ylabel("effective participation")


def trajectory(path, ax):
    df = pd.read_csv(path)
    ax.plot(df.t, df.theta)
    ax.set_xlabel("t")
    ax.set_ylabel("theta")


def trace(path, ax):
    df = pd.read_csv(path)
    for seed, g in df.groupby("seed"):
        ax.plot(g.slot, g.theta_hat, lw=0.7, label=f"seed {seed}")
    ax.set_xlabel("slot")
    ax.set_ylabel("theta_hat")
    ax.legend(fontsize="small")


def best_response(path, ax):
    df = pd.read_csv(path)
    for k, g in df.groupby("type"):
        ax.plot(g.theta, g.a_star, label=f"type {k}")
    ax.set_xlabel("theta")
    ax.set_ylabel("a*")
    ax.legend()


def sweep(path, ax):
    df = pd.read_csv(path)
    if {"r0", "tau"} <= set(df.columns):
        for tau, g in df.groupby("tau"):
            ax.plot(g.r0, g.operator_utility, label=f"tau={tau}")
        ax.set_xlabel("r0")
        ax.set_ylabel("operator utility")
        ax.legend()
    else:
        x = df.columns[0]
        ax.plot(df[x], df.theta_inf)
        ax.set_xlabel(x)
        ax.set_ylabel("theta_inf")


PLOTS = {
    "reward_curve": reward_curve,
    "trajectory": trajectory,
    "trace": trace,
    "best_response": best_response,
    "sweep": sweep,
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out")
    ap.add_argument("--save", default=None)
    args = ap.parse_args()
    save = args.save or args.out
    drawn = 0
    for name, draw in PLOTS.items():
        for path in tables(args.out, name):
            fig, ax = plt.subplots(figsize=(6, 4))
            draw(path, ax)
            ax.set_title(os.path.basename(path))
            fig.tight_layout()
            png = os.path.join(save, os.path.basename(path)[:-4] + ".png")
            fig.savefig(png, dpi=120)
            plt.close(fig)
            print(png)
            drawn += 1
    if drawn == 0:
        print("no plottable tables found")


if __name__ == "__main__":
    main()
