"""Command-line experiment runner.

Usage: sgpe SUBCOMMAND --config FILE [--seed U64] [--out DIR] [--threads INT]

Subcommands: basis-check, cutoff-probe, wick-verify, semigroup-check,
simulate (config key mode = lq-decay | coupled-stationary), gibbs (mode =
sample | fd-compare).  Every run writes its artifacts plus a manifest.json
recording the resolved configuration, a content hash of the config file, and
checksums of the outputs.  All numeric artifact content is a pure function of
config + seed.  Exit codes: 0 success, 2 config validation failure, 3 runtime
failure (partial artifacts left in place).
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .hermite import (
    BasisTable,
    SpectralField,
    analyze,
    apply_H_power,
    synthesize,
)
from .cutoff import (
    hermite_lp_decay_probe,
    kernel_norm_probe,
    rho_lp_growth_probe,
    rho_N,
    sn_norm_probe,
    theta_exponent,
)
from .gaussian import (
    NoiseParams,
    chaos_covariance_check,
    nelson_probe,
    sample_mu_N,
    wick_centering_check,
)
from .dynamics import (
    BlowupError,
    apply_semigroup,
    coupled_stationary_run,
    lq_admissible,
    lq_decay_run,
    lq_envelope_fraction,
    mehler_apply,
)
from .gibbs import (
    default_observables,
    fluctuation_dissipation_compare,
    make_target,
    run_mala,
    split_rhat,
)
from .io import (
    ConfigError,
    config_get,
    parse_config,
    sha256_file,
    write_csv,
    write_json,
    write_manifest,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _resolve(args) -> tuple[dict, Path, int, int]:
    cfg = parse_config(args.config)
    seed = args.seed if args.seed is not None else config_get(cfg, "seed", int, 0)
    cfg["seed"] = str(seed)
    out = Path(args.out if args.out else config_get(cfg, "out", str, "."))
    out.mkdir(parents=True, exist_ok=True)
    threads = args.threads or int(os.environ.get("SGPE_THREADS", "0")) or 1
    return cfg, out, seed, threads


def _noise_params(cfg: dict) -> NoiseParams:
    g1 = config_get(cfg, "gamma1", float, required=True)
    g2 = config_get(cfg, "gamma2", float, 0.0)
    if g1 <= 0:
        raise ConfigError("gamma1 must be positive")
    return NoiseParams(g1, g2)


def _basis_table(cfg: dict, deg_key: str = "deg_max", quartic: bool = False) -> BasisTable:
    deg = config_get(cfg, deg_key, int, required=True)
    M = config_get(cfg, "num_nodes", int)
    if M is not None and M < 2 * deg + 1:
        raise ConfigError("num_nodes must be at least 2*deg_max+1")
    return BasisTable(deg, num_nodes=M)


# ---------------------------------------------------------------------------
# subcommands

def cmd_basis_check(cfg, out, seed, threads):
    bt = _basis_table(cfg)
    deg = bt.deg_max
    _, w, H = bt.grid_data("gauss")
    Hw = H * w
    G1 = Hw @ H.T  # 1D Gram; the 2D Gram is its tensor square
    gram_dev = float(np.max(np.abs(G1 - np.eye(deg + 1))))

    rng = np.random.default_rng(seed)
    f = sample_mu_N(deg, rng)
    g = analyze(synthesize(f, bt), bt, deg)
    round_trip = float(np.max(np.abs(g.coeffs - f.coeffs)) /
                       np.max(np.abs(f.coeffs)))
    report = {
        "deg_max": deg,
        "num_nodes": bt.num_nodes,
        "max_gram_deviation": gram_dev,
        "round_trip_rel_error": round_trip,
        "pass": gram_dev < 1e-10 and round_trip < 1e-8,
    }
    write_json(out / "basis_check.json", report)
    return EXIT_OK if report["pass"] else EXIT_RUNTIME, [out / "basis_check.json"]


def cmd_cutoff_probe(cfg, out, seed, threads):
    deg = config_get(cfg, "deg_max", int, 130)
    bt = BasisTable(deg)
    p = config_get(cfg, "p", float, 4.0)
    N_list = [int(s) for s in config_get(cfg, "N_list", str, "4,8,16,32").split(",")]
    trunc_list = [int(s) for s in config_get(cfg, "trunc_list", str, "16,32,64,128").split(",")]
    k_lo = config_get(cfg, "decay_k_min", int, 8)
    k_hi = config_get(cfg, "decay_k_max", int, 40)
    r = config_get(cfg, "kernel_r", float, 4.0)
    alphas = [float(s) for s in config_get(cfg, "kernel_alphas", str, "0.3,0.9").split(",")]
    trials = config_get(cfg, "sn_trials", int, 20)

    rows = []
    slope = hermite_lp_decay_probe(p, range(k_lo, k_hi + 1))
    rows.append(("hermite_lp_decay", f"p={p};k={k_lo}..{k_hi}", slope))

    norms, growth = rho_lp_growth_probe(p, N_list, bt)
    rows.append(("rho_lp_growth_slope", f"p={p};N={N_list}", growth))
    rows.append(("rho_lp_growth_bound", f"p={p}", 1.0 - theta_exponent(2.0 * p) + 0.1))

    rng = np.random.default_rng(seed)
    ratios, trend = sn_norm_probe(p, N_list, trials, bt, rng)
    rows.append(("sn_norm_trend", f"p={p};N={N_list}", trend))
    for N, val in zip(N_list, ratios):
        rows.append(("sn_norm_ratio", f"p={p};N={N}", val))

    for alpha in alphas:
        seq = kernel_norm_probe(r, alpha, 1, trunc_list, bt)
        rel_growth = seq[-1] / seq[0] - 1.0
        rows.append(("kernel_norm_growth", f"r={r};alpha={alpha}", rel_growth))
        for T, v in zip(trunc_list, seq):
            rows.append(("kernel_norm", f"r={r};alpha={alpha};T={T}", v))

    write_csv(out / "cutoff_probes.csv", ["probe", "params", "value"], rows)
    return EXIT_OK, [out / "cutoff_probes.csv"]


def cmd_wick_verify(cfg, out, seed, threads):
    N = config_get(cfg, "N", int, 8)
    bt = BasisTable(N)
    samples = config_get(cfg, "samples", int, 10_000)
    cov_samples = config_get(cfg, "cov_samples", int, 100_000)
    rng = np.random.default_rng(seed)
    mid = bt.num_nodes // 2
    nodes = [(mid, mid), (mid + 1, mid - 1)]

    rows = wick_centering_check(N, nodes, samples, bt, rng)
    csv_rows = [(f"{r['node']}", r["k"], r["l"], r["mean"], r["se"]) for r in rows]
    write_csv(out / "wick_centering.csv", ["node", "k", "l", "mean", "se"], csv_rows)
    center_ok = all(abs(r["mean"]) <= 4.0 * r["se"] for r in rows)

    cov = chaos_covariance_check(N, nodes[0], nodes[1], cov_samples, bt, rng)
    cov_report, cov_ok = {}, True
    for (nx, ny), (emp, pred, se) in cov.items():
        z = (emp - pred) / se
        cov_ok &= abs(z) <= 5.0
        cov_report[f"{nx}{ny}"] = {"empirical": emp, "predicted": pred,
                                   "se": se, "z": z}

    nelson = {}
    nelson_ok = True
    for n in (1, 2, 3):
        ratio = nelson_probe(n, 4, cov_samples, N, nodes[0], bt, rng)
        nelson[f"n{n}_p4"] = ratio
        nelson_ok &= ratio <= 1.05

    report = {"centering_pass": center_ok, "chaos_covariance": cov_report,
              "chaos_pass": cov_ok, "nelson_ratios": nelson,
              "nelson_pass": nelson_ok,
              "pass": center_ok and cov_ok and nelson_ok}
    write_json(out / "wick_verify.json", report)
    outs = [out / "wick_centering.csv", out / "wick_verify.json"]
    return (EXIT_OK if report["pass"] else EXIT_RUNTIME), outs


def cmd_semigroup_check(cfg, out, seed, threads):
    deg = config_get(cfg, "deg_max", int, 8)
    M = config_get(cfg, "num_nodes", int, 64)
    bt = BasisTable(deg, num_nodes=M)
    times = [float(s) for s in config_get(cfg, "times", str, "0.05,0.2").split(",")]
    pairs = [(1.0, 0.0), (1.0, 0.5)]
    rng = np.random.default_rng(seed)
    f = sample_mu_N(deg, rng)

    rows, worst = [], 0.0
    for (g1, g2) in pairs:
        params = NoiseParams(g1, g2)
        for t in times:
            exact = synthesize(apply_semigroup(f, t, params), bt).values
            via_kernel = mehler_apply(synthesize(f, bt), t, params, bt).values
            rel = float(np.max(np.abs(via_kernel - exact)) / np.max(np.abs(exact)))
            worst = max(worst, rel)
            rows.append(("mehler_vs_multiplier", f"t={t};gamma=({g1},{g2})", rel))
            # smoothing: one H^1-unit of regularity gained, ratio stays finite
            sm = apply_H_power(apply_semigroup(f, t, params), 1.0)
            ratio = sm.l2_norm() / f.l2_norm()
            rows.append(("smoothing_h1_over_l2", f"t={t};gamma=({g1},{g2})", ratio))
    write_csv(out / "semigroup_check.csv", ["probe", "params", "value"], rows)
    write_json(out / "semigroup_check.json",
               {"max_rel_error": worst, "pass": worst < 1e-7})
    outs = [out / "semigroup_check.csv", out / "semigroup_check.json"]
    return (EXIT_OK if worst < 1e-7 else EXIT_RUNTIME), outs


def _simulate_lq_decay(cfg, out, seed, threads):
    N = config_get(cfg, "N", int, required=True)
    bt = BasisTable(N, num_nodes_quartic=4 * N + 1)
    params = _noise_params(cfg)
    q = config_get(cfg, "q", int, 4)
    if not lq_admissible(q, params):
        raise ConfigError(
            "inadmissible exponent: need q < 2 + 2(kappa^2 + kappa sqrt(1+kappa^2)), "
            "kappa = gamma1/|gamma2|"
        )
    T = config_get(cfg, "T", float, 10.0)
    dt = config_get(cfg, "dt", float, 0.01)
    n_paths = config_get(cfg, "ensemble", int, 8)
    sample_every = config_get(cfg, "sample_every", int, 5)
    amp = config_get(cfg, "u0_amplitude", float, 1.0)

    rho = rho_N(N, bt)
    seeds = np.random.SeedSequence(seed).spawn(n_paths)

    def one(i):
        rng = np.random.default_rng(seeds[i])
        u0 = SpectralField(N, amp * sample_mu_N(N, rng).coeffs)
        return lq_decay_run(u0, q, T, dt, params, N, bt, rng, rho=rho,
                            sample_every=sample_every)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            stats = list(pool.map(one, range(n_paths)))
    else:
        stats = [one(i) for i in range(n_paths)]

    rows = []
    for i, st in enumerate(stats):
        a = st.arrays()
        for j in range(a["t"].size):
            rows.append((i, a["t"][j], a["lq_q"][j], a["h1_sq"][j],
                         a["l4_4"][j], int(a["flags"][j])))
    write_csv(out / "lq_decay.csv",
              ["path", "t", "lq_q", "h1_sq", "l4_4", "flag"], rows)
    frac, C_hat = lq_envelope_fraction(stats, q, params)
    report = {"q": q, "ensemble": n_paths, "envelope_fraction": frac,
              "C_hat": C_hat,
              "blowups": int(sum(any(st.flags) for st in stats))}
    write_json(out / "lq_decay.json", report)
    outs = [out / "lq_decay.csv", out / "lq_decay.json"]
    return (EXIT_RUNTIME if report["blowups"] else EXIT_OK), outs


def _simulate_coupled(cfg, out, seed, threads):
    N = config_get(cfg, "N", int, required=True)
    bt = BasisTable(N)
    params = _noise_params(cfg)
    m = config_get(cfg, "m", float, 1.0)
    T = config_get(cfg, "T", float, 50.0)
    dt = config_get(cfg, "dt", float, 0.01)
    burn_in = config_get(cfg, "burn_in", float, 5.0)
    sample_every = config_get(cfg, "sample_every", int, 5)
    rng = np.random.default_rng(seed)

    st = coupled_stationary_run(params, N, m, T, dt, burn_in, rng, bt,
                                sample_every=sample_every)
    a = st.arrays()
    rows = list(zip(a["t"], a["lq_q"], a["h1_sq"], a["h_inv_m_moment"],
                    a["l4_4"], a["flags"].astype(int)))
    write_csv(out / "coupled_stationary.csv",
              ["t", "lq_q", "h1_sq", "h_frac_moment", "l4_4", "flag"], rows)
    from .gibbs import batch_means_se
    mom = a["h_inv_m_moment"]
    report = {"N": N, "m": m,
              "h_frac_moment_mean": float(mom.mean()),
              "h_frac_moment_se": batch_means_se(mom),
              "blowup": bool(np.any(a["flags"]))}
    write_json(out / "coupled_stationary.json", report)
    outs = [out / "coupled_stationary.csv", out / "coupled_stationary.json"]
    return (EXIT_RUNTIME if report["blowup"] else EXIT_OK), outs


def cmd_simulate(cfg, out, seed, threads):
    mode = config_get(cfg, "mode", str, required=True)
    if mode == "lq-decay":
        return _simulate_lq_decay(cfg, out, seed, threads)
    if mode == "coupled-stationary":
        return _simulate_coupled(cfg, out, seed, threads)
    raise ConfigError(f"unknown simulate mode {mode!r}")


def _gibbs_sample(cfg, out, seed, threads):
    N = config_get(cfg, "N", int, required=True)
    bt = BasisTable(N, num_nodes_quartic=4 * N + 1)
    n_chains = config_get(cfg, "chains", int, 4)
    steps = config_get(cfg, "steps", int, 10_000)
    burn = config_get(cfg, "burn_in", int, 2_000)
    sn_inside = config_get(cfg, "gibbs_sn_inside", bool, True)
    target = make_target(N, bt, sn_inside=sn_inside)
    obs = default_observables(target)
    seeds = np.random.SeedSequence(seed).spawn(n_chains)

    def one(s):
        return run_mala(target, steps, burn, np.random.default_rng(s),
                        observables=obs)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chains = list(pool.map(one, seeds))
    else:
        chains = [one(s) for s in seeds]

    rows = []
    names = list(obs)
    for c, res in enumerate(chains):
        n = res["traces"][names[0]].size
        for j in range(n):
            rows.append((c, j, *(res["traces"][nm][j] for nm in names)))
    write_csv(out / "gibbs_samples.csv", ["chain", "step", *names], rows)
    report = {
        "acceptance": [c["acceptance"] for c in chains],
        "step_size": [c["eps"] for c in chains],
        "rhat": {nm: split_rhat(np.stack([c["traces"][nm] for c in chains]))
                 for nm in names},
        "means": {nm: float(np.concatenate(
            [c["traces"][nm] for c in chains]).mean()) for nm in names},
    }
    report["pass"] = all(r < 1.1 for r in report["rhat"].values())
    write_json(out / "gibbs_samples.json", report)
    outs = [out / "gibbs_samples.csv", out / "gibbs_samples.json"]
    return (EXIT_OK if report["pass"] else EXIT_RUNTIME), outs


def _gibbs_fd_compare(cfg, out, seed, threads):
    N = config_get(cfg, "N", int, required=True)
    bt = BasisTable(N, num_nodes_quartic=4 * N + 1)
    params = _noise_params(cfg)
    rep = fluctuation_dissipation_compare(
        params, N, bt, seed,
        n_chains=config_get(cfg, "chains", int, 4),
        mcmc_steps=config_get(cfg, "steps", int, 20_000),
        mcmc_burn=config_get(cfg, "burn_in", int, 4_000),
        dyn_T=config_get(cfg, "T", float, 400.0),
        dyn_dt=config_get(cfg, "dt", float, 0.005),
        dyn_burn=config_get(cfg, "dyn_burn", float, 20.0),
        sn_inside=config_get(cfg, "gibbs_sn_inside", bool, True),
    )
    write_json(out / "fd_compare.json", rep)
    ok = (not rep["inconclusive"]) and all(
        abs(d["z"]) <= 5.0 for d in rep["observables"].values())
    return (EXIT_OK if ok else EXIT_RUNTIME), [out / "fd_compare.json"]


def cmd_gibbs(cfg, out, seed, threads):
    mode = config_get(cfg, "mode", str, required=True)
    if mode == "sample":
        return _gibbs_sample(cfg, out, seed, threads)
    if mode == "fd-compare":
        return _gibbs_fd_compare(cfg, out, seed, threads)
    raise ConfigError(f"unknown gibbs mode {mode!r}")


COMMANDS = {
    "basis-check": cmd_basis_check,
    "cutoff-probe": cmd_cutoff_probe,
    "wick-verify": cmd_wick_verify,
    "semigroup-check": cmd_semigroup_check,
    "simulate": cmd_simulate,
    "gibbs": cmd_gibbs,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sgpe", description="Hermite-spectral simulation experiments")
    parser.add_argument("subcommand", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="key = value config file")
    parser.add_argument("--seed", type=int, default=None,
                        help="RNG seed (overrides the config)")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: SGPE_THREADS or 1)")
    args = parser.parse_args(argv)

    t0 = time.time()
    try:
        cfg, out, seed, threads = _resolve(args)
        cfg["config_sha256"] = sha256_file(args.config)
        code, outputs = COMMANDS[args.subcommand](cfg, out, seed, threads)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowupError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    write_manifest(out / "manifest.json", cfg, outputs, t0)
    if code != EXIT_OK:
        print("checks failed; see artifacts", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
