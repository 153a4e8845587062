"""Monte Carlo estimate of the target return G* for each task family.

Re-simulates the scripted expert independently of the C++ code, pooling
returns over the training goals with fresh reset velocities, and prints the
90th percentile rounded to two significant figures. The frozen values in
test_evaluator.cpp come from this script.
"""
import math

import numpy as np

DT, MU, C, T = 0.1, 0.5, 0.05, 100


def expert_returns(family, goal, n, rng):
    v = rng.uniform(-0.05, 0.05, size=(n, 2))
    total = np.zeros(n)
    for _ in range(T):
        if family == "point-dir":
            a = np.tile([goal, 0.0], (n, 1))
        elif family == "point-vel":
            a = np.stack([np.clip(2 * (goal - v[:, 0]), -1, 1), np.clip(-2 * v[:, 1], -1, 1)], axis=1)
        else:
            a = np.tile([math.cos(goal), math.sin(goal)], (n, 1))
        v = v + a * DT - MU * v * DT
        ctrl = C * (a ** 2).sum(axis=1)
        if family == "point-dir":
            r = goal * v[:, 0]
        elif family == "point-vel":
            r = -(v[:, 0] - goal) ** 2
        else:
            r = v[:, 0] * math.cos(goal) + v[:, 1] * math.sin(goal)
        total += r - ctrl
    return total


def round_sig(x, digits=2):
    if x == 0:
        return 0.0
    e = math.floor(math.log10(abs(x)))
    s = 10.0 ** (digits - 1 - e)
    return round(x * s) / s


def main():
    rng = np.random.default_rng(0)
    vel_train = [3 * i / 39 for i in range(40) if i not in (2, 7, 15, 23, 26)]
    angle_train = [2 * math.pi * i / 50 for i in range(50) if i not in (6, 17, 23, 30, 41)]
    ood_train = [2 * math.pi * i / 50 for i in (8, 13, 16, 20, 22, 26, 32, 37)]
    families = {
        "point-dir": ("point-dir", [1.0, -1.0]),
        "point-vel": ("point-vel", vel_train),
        "point-dir-angle": ("angle", angle_train),
        "point-dir-angle ood": ("angle", ood_train),
    }
    for name, (family, goals) in families.items():
        pooled = np.concatenate([expert_returns(family, g, 20000, rng) for g in goals])
        p90 = np.percentile(pooled, 90)
        print(f"{name}: p90={p90:.4f} G*={round_sig(p90):g} mean={pooled.mean():.4f}")


if __name__ == "__main__":
    main()
