"""End-to-end neural pipeline under a best-response feature shift.

Drives the command line rather than the library: the config below trains a
57->50->10->1 MLP with minibatch SGD while every deployed iterate lets the
samples take one gradient step of the classifier output against it,
x -> x - eps * grad_x f_theta(x).  The run writes a trajectory CSV; this
script then reads the CSV back through the public reader and reports how
far the stationarity measure fell between the first and last decile of
capture points.

Run: python3 demos/04_nn_best_response.py   (about 30 seconds)
"""

import os
import tempfile
import textwrap

import numpy as np

from perfpred.cli import io
from perfpred.cli.main import main

CONFIG = textwrap.dedent("""\
    task = synthetic
    data.m = 400
    data.d = 57
    data.flip_frac = 0.0
    data.seed = 0
    model.kind = mlp
    model.h1 = 10
    model.h2 = 50
    map.kind = best_response
    map.eps = 10
    run.plans = greedy(b=8)
    run.schedule = inv_sqrt_t(20)
    run.T = 1e4
    run.eval_every = 25
    run.seeds = 0
""")

with tempfile.TemporaryDirectory() as work:
    cfg_path = os.path.join(work, "nn.cfg")
    with open(cfg_path, "w") as fh:
        fh.write(CONFIG)
    out_dir = os.path.join(work, "out")

    code = main(["run", "--config", cfg_path, "--out", out_dir])
    print(f"exit code: {code}")

    csv_path = os.path.join(out_dir, "runs", "greedy-b8-eps10-seed0.csv")
    cols = io.read_trajectory_csv(csv_path)

    sps = cols["sps_sq"]
    k = max(1, len(sps) // 10)
    first, last = float(sps[:k].mean()), float(sps[-k:].mean())
    print()
    print(f"capture points: {len(sps)}, status: {set(cols['status'])}")
    print(f"sps_sq first decile: {first:.4e}")
    print(f"sps_sq last decile:  {last:.4e}")
    print(f"reduction factor:    {first / last:.0f}x")
    print(f"final train acc {cols['train_acc'][-1]:.3f}, "
          f"test acc {cols['test_acc'][-1]:.3f}")
