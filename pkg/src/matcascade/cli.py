"""Command line driver: ``matcascade <command> --config PATH --out PATH``.

Exit codes: 0 on success, 1 for runtime, capacity or capability errors,
2 for config errors.  CSV output starts with one ``#`` header line naming
the tool version; the body is deterministic given the config.
"""

import argparse
import math
import sys

from . import __version__
from .bindweed import classify_phase, exact_stationary_truncated, run_replicas
from .cascade import run_cascade
from .chaos import chaos_diagnose
from .config import ConfigError, load_config_file
from .errors import CapabilityError, CapacityError, CountOverflowError, DomainError
from .lyap import estimate_k, estimate_lambda, lambda_shortcut
from .matenv import Environment, RateLaw
from .tree import branching_number, growth_rates


def fmt(x):
    """Reals with 17 significant digits; integers and strings verbatim."""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return format(x, ".17g")
    if x is None:
        return ""
    return str(x)


def write_csv(path, command, columns, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# matcascade {__version__} {command}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def _matrix_law(law):
    return law.matrix_law() if isinstance(law, RateLaw) else law


def cmd_estimate_k(cfg, out, threads):
    sec = cfg.estimate_k
    law = _matrix_law(cfg.law)
    rows = []
    for s in sec.s:
        est = estimate_k(law, s, sec.n_list, sec.replicas, cfg.seed, sec.method, threads)
        rows.append((est.s, est.k_hat, est.std_err, est.n_window[0], est.n_window[1], est.replicas))
    write_csv(out, "estimate-k", ("s", "k_hat", "std_err", "n_min", "n_max", "replicas"), rows)


def classify_report(cfg, threads=1):
    sec = cfg.classify
    law = _matrix_law(cfg.law)
    report = {}
    lam = None
    if sec.use_shortcut:
        try:
            lam, se, source, s_star = lambda_shortcut(law), 0.0, "shortcut", math.nan
        except CapabilityError as exc:
            report["shortcut_refused"] = str(exc)
    if lam is None:
        est = estimate_lambda(law, sec.grid, sec.tol, sec.replicas, sec.n_list, cfg.seed,
                              sec.method, threads)
        lam, se, source, s_star = est.lambda_hat, est.std_err, "estimate", est.s_star
    gr_lo, gr_up = growth_rates(cfg.tree, sec.tree_depth)
    br = branching_number(cfg.tree, sec.tree_depth)
    verdict = classify_phase(lam, se, gr_up, br, sec.z)
    report.update(lambda_hat=lam, lambda_std_err=se, lambda_source=source, s_star=s_star,
                  growth_lower=gr_lo, growth_upper=gr_up, branching=br,
                  lambda_gr=lam * gr_up, lambda_br=lam * br,
                  lambda_gr_upper=(lam + sec.z * se) * gr_up, lambda_br_lower=(lam - sec.z * se) * br,
                  verdict=verdict)
    return report


def cmd_classify(cfg, out, threads):
    report = classify_report(cfg, threads)
    write_csv(out, "classify", ("quantity", "value"), report.items())
    print(f"lambda_hat = {report['lambda_hat']:.6g} +/- {report['lambda_std_err']:.2g} "
          f"({report['lambda_source']})")
    print(f"lambda*gr = {report['lambda_gr']:.6g}  lambda*br = {report['lambda_br']:.6g}")
    print(f"verdict: {report['verdict']}")


def cmd_cascade(cfg, out, threads):
    sec = cfg.cascade
    series = run_cascade(cfg.tree, cfg.law, cfg.seed, sec.n_max, sec.width_cap)
    slopes = series.running_slopes()
    rows = [(n, series.kappa[n], series.log_psi[n], series.log_Z[n], slopes[n])
            for n in range(series.n_max + 1)]
    write_csv(out, "cascade", ("n", "kappa_n", "log_psi_quadform", "log_Z", "slope_estimate"), rows)


def cmd_bindweed(cfg, out, threads):
    sec = cfg.bindweed
    env = Environment(cfg.law, cfg.seed)
    if sec.mode == "exact":
        st = exact_stationary_truncated(env, cfg.tree, sec.depth, sec.max_states)
        write_csv(out, "bindweed", ("state", "pi"), ((str(s), float(p)) for s, p in zip(st.states, st.pi)))
        return
    trajs = run_replicas(env, cfg.tree, cfg.seed, sec.replicas, sec.t_max, sec.jump_max, threads)
    rows = []
    for r, tr in enumerate(trajs):
        gaps = tr.return_intervals
        mean_rt = float(gaps.mean()) if len(gaps) else math.nan
        rows.append((r, tr.returns, mean_rt, tr.max_depth, tr.final_depth, tr.censored))
    write_csv(out, "bindweed", ("replica", "returns", "mean_return_time", "max_depth", "final_depth",
                                "censored_excursions"), rows)


def cmd_chaos(cfg, out, threads):
    sec = cfg.chaos
    rep = chaos_diagnose(cfg.law, sec.b, sec.iters, sec.population, cfg.seed, sec.init,
                         sec.lambda_hat, sec.eps, threads)
    write_csv(out, "chaos", ("generation", "log_mean_norm", "slope_running"), rep.rows())
    lb = "n/a" if rep.lambda_b is None else f"{rep.lambda_b:.6g}"
    ld = "n/a" if rep.lambda_d is None else f"{rep.lambda_d:.6g}"
    print(f"slope = {rep.slope:.6g}  verdict: {rep.verdict}  lambda*b = {lb}  lambda*d = {ld}")


COMMANDS = {
    "estimate-k": cmd_estimate_k,
    "classify": cmd_classify,
    "cascade": cmd_cascade,
    "bindweed": cmd_bindweed,
    "chaos": cmd_chaos,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="matcascade", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"matcascade {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--out", required=True, metavar="PATH")
        p.add_argument("--threads", type=int, default=1, metavar="N")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config_file(args.config, args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        COMMANDS[args.command](cfg, args.out, args.threads)
    except (CapacityError, CapabilityError, CountOverflowError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
