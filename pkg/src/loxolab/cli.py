"""``loxolab`` command line.

Pipeline: automaton -> almost-semisimple check -> spectral data -> Markov
chain -> action -> experiment -> CSV + JSON sidecar (+ optional figure).
Exit status 0 on success, 2 on a validation failure, 1 on other errors.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

from . import __version__
from .actions import action_from_config, builtin_action, load_action
from .automaton import (almost_semisimple_check, builtin_automaton,
                        load_automaton, paths_from, scc_report)
from .errors import LoxolabError, NotAlmostSemisimple, ValidationError
from .experiments import (ExperimentReport, boundary_convergence_diag, drift,
                          genericity_scan, gromov_product_stats,
                          shadow_decay_scan, translation_growth_mc)
from .markov import (build_chain, counting_vs_markov, first_return,
                     n_step_prob, path_blocks, ps_cone_measure,
                     recurrent_components)
from .report import format_value, write_report
from .spectral import growth_bound_constants, spectral_data
from .words import format_word, parse_word

COMMANDS = ("check", "spectral", "sample", "returns", "measure", "drift",
            "genericity", "shadows", "gromov", "converge", "translation",
            "describe")

# per-command defaults for the shared numeric flags
DEFAULTS = {
    "spectral": dict(n_max=20),
    "sample": dict(n=10, trials=10),
    "returns": dict(trials=100_000),
    "measure": dict(n_max=10),
    "drift": dict(n=12, trials=10_000),
    "genericity": dict(n_max=10, epsilon=0.1, trials=10_000),
    "shadows": dict(horizon=20, trials=20_000),
    "gromov": dict(n=10, trials=10_000),
    "converge": dict(n=200, trials=2_000),
    "translation": dict(n=200, trials=2_000, epsilon=0.2),
}


@dataclass
class RunConfig:
    command: str
    automaton_source: str
    action: dict
    params: dict
    seed: int = 0
    out: str = "loxolab-out"
    workers: int = 1
    plot: bool = False
    argv: list = field(default_factory=list)


def _generators(automaton):
    return [x for x in automaton.alphabet if not x.endswith("^-1")]


def load_source(source):
    kind, _, value = source.partition(":")
    if kind == "file":
        return load_automaton(value)
    return builtin_automaton(value)


def make_action(cfg, automaton):
    if "file" in cfg:
        return load_action(cfg["file"])
    if "builtin" in cfg:
        return builtin_action(cfg["builtin"], _generators(automaton))
    return action_from_config(cfg)


def _validated(automaton):
    report = scc_report(automaton)
    check = almost_semisimple_check(automaton, report)
    if not check:
        raise NotAlmostSemisimple(f"graph is not almost semisimple: {check.reason}")
    return report


# -- report builders for the automaton/chain commands ---------------------------

def check_report(A):
    report = scc_report(A)
    check = almost_semisimple_check(A, report)
    cols = ["component", "members", "radius", "period", "maximal"]
    rows = []
    maximal = set(report.maximal_components())
    for c, members in enumerate(report.members):
        rows.append((c, " ".join(A.vertex_name(v) for v in members),
                     float(report.radius[c]), report.period[c], c in maximal))
    rep = ExperimentReport("check", cols, rows, automaton_hash=A.content_hash(),
                           summary={"almost_semisimple": bool(check),
                                    "witness": check.witness, "reason": check.reason,
                                    "growth": float(report.growth)})
    return rep, check


def spectral_report(A, n_max):
    sd = spectral_data(A)
    consts = growth_bound_constants(A, n_max, sd)
    cols = ["vertex", "name", "growth_class", "rho", "rho_normalized",
            "ratio_min", "ratio_max", "fitted_rate"]
    rows = []
    for v in range(A.vertex_count):
        k = consts[v]
        rows.append((v, A.vertex_name(v), sd.growth_class[v],
                     sd.exact_rho[v] if sd.exact_rho else float(sd.rho[v]),
                     sd.normalized_rho(v), k.ratio_min, k.ratio_max, k.fitted_rate))
    return ExperimentReport("spectral", cols, rows, params={"n_max": n_max},
                            automaton_hash=A.content_hash(),
                            summary={"lambda": sd.lam, "period": sd.period,
                                     "cesaro_steps": sd.steps})


def sample_report(A, chain, action, n, trials, seed, workers):
    cols = ["trial", "n", "word", "terminal", "absorbed", "displacement"]
    rows = []
    k = 0
    for verts, labs in path_blocks(chain, n, trials, seed, workers=workers):
        for vs, w, raw in zip(verts.tolist(), chain.words(labs.tolist()), labs.tolist()):
            rows.append((k, n, format_word(w), A.vertex_name(vs[-1]),
                         len(w) < len(raw), action.displacement(w)))
            k += 1
    return ExperimentReport("sample", cols, rows, params=dict(n=n, trials=trials),
                            automaton_hash=A.content_hash(),
                            action_hash=action.config_hash())


def _vertex(A, spec):
    if spec is None:
        return None
    if spec.isdigit():
        return int(spec)
    names = [A.vertex_name(v) for v in range(A.vertex_count)]
    if spec not in names:
        raise ValueError(f"unknown vertex {spec!r}")
    return names.index(spec)


def returns_report(A, chain, vertex, trials, seed, workers):
    if vertex is None:
        vertex = recurrent_components(chain).recurrent[0][0]
    fr = first_return(chain, vertex, trials, seed, workers=workers)
    cols = ["k", "count", "prob", "se"]
    rows = [(k, c, fr.prob(k), fr.prob_se(k)) for k, c in fr.histogram.items()]
    return ExperimentReport("returns", cols, rows,
                            params=dict(vertex=vertex, trials=trials),
                            automaton_hash=A.content_hash(),
                            summary={"vertex": A.vertex_name(vertex),
                                     "mean_return": fr.mean_return,
                                     "mean_return_se": fr.mean_return_se,
                                     "tail_slope": fr.tail_slope,
                                     "tail_residual": fr.tail_residual,
                                     "truncated": fr.truncated})


def measure_report(A, chain, n_max, depth=2, word=None):
    cones = [w for k in range(1, depth + 1)
             for w, _ in paths_from(A, A.initial, k)]
    cols = ["cone", "n", "counting", "markov", "ratio", "bound", "ok", "ps_measure"]
    rows = []
    for n in range(depth, n_max + 1):
        for cmp in counting_vs_markov(A, chain, n, cones):
            g = cmp.cone[0]
            rows.append((format_word(g), n, cmp.counting, cmp.markov, cmp.ratio,
                         cmp.bound, cmp.ok, ps_cone_measure(chain, g)))
    summary = {"all_ok": all(r[6] for r in rows)}
    if word is not None:
        summary["word"] = format_word(word)
        summary["n_step_prob"] = n_step_prob(chain, word)
        summary["ps_cone_measure"] = ps_cone_measure(chain, word)
    return ExperimentReport("measure", cols, rows, params=dict(n_max=n_max, depth=depth),
                            automaton_hash=A.content_hash(), summary=summary)


def describe_text(target, A, chain=None, action=None):
    lines = []
    info = {"target": target}
    if target in ("automaton", "chain"):
        sd = chain.spectral if chain else spectral_data(A)
        rec = recurrent_components(chain, check=False) if chain else None
        lines.append(f"vertices {A.vertex_count}, edges {len(A.edges)}, "
                     f"alphabet {' '.join(A.alphabet)}")
        lines.append(f"lambda = {sd.lam:.6f}")
        info.update(vertices=A.vertex_count, edges=len(A.edges), alphabet=list(A.alphabet),
                    lam=sd.lam, hash=A.content_hash())
        info["vertex_table"] = []
        for v in range(A.vertex_count):
            rho = sd.exact_rho[v] if sd.exact_rho else float(sd.rho[v])
            lines.append(f"  {A.vertex_name(v):>10}  {sd.growth_class[v]:<5}  "
                         f"rho = {format_value(rho)}")
            info["vertex_table"].append({"vertex": A.vertex_name(v),
                                         "class": sd.growth_class[v],
                                         "rho": format_value(rho)})
        if rec is not None:
            comps = [[A.vertex_name(v) for v in c] for c in rec.recurrent]
            lines.append(f"recurrent components: {comps}")
            info["recurrent"] = comps
    if target == "chain":
        lines.append("transitions:")
        info["transitions"] = []
        for (s, t, l), p in zip(A.edges, chain.probs):
            lines.append(f"  {A.vertex_name(s):>10} --{l}--> {A.vertex_name(t):<10} "
                         f"{format_value(p)}")
            info["transitions"].append([A.vertex_name(s), l, A.vertex_name(t),
                                        format_value(p)])
        for v in sorted(chain.synthetic):
            lines.append(f"  {A.vertex_name(v):>10} (absorbing self-loop)  1")
    if target == "action":
        cfg = action.config()
        lines.append(f"{action.kind}: delta = {action.delta:g}, c_delta = "
                     f"{action.c_delta:g}, Lipschitz constant = "
                     f"{action.lipschitz_constant():.6g}")
        lines.append(json.dumps(cfg, sort_keys=True))
        info.update(action=cfg, hash=action.config_hash(),
                    lipschitz=action.lipschitz_constant())
    return "\n".join(lines), info


# -- argument parsing ----------------------------------------------------------

def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--builtin", help="free:K | cyclic:P,Q | freeprod:K,L (default free:2)")
    src.add_argument("--automaton", help="automaton JSON file")
    act = common.add_mutually_exclusive_group()
    act.add_argument("--action", help="cayley-tree | bass-serre[:P,Q] | plane | quotient[:P,Q]")
    act.add_argument("--action-file", help="action config JSON file")
    common.add_argument("--n", type=int)
    common.add_argument("--n-max", type=int)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default="loxolab-out", help="output directory")
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    common.add_argument("--plot", action="store_true", help="also write a PNG figure")

    p = argparse.ArgumentParser(prog="loxolab",
                                description="Counting and random-walk experiments on combed groups.")
    p.add_argument("--version", action="version", version=f"loxolab {__version__}")
    p.add_argument("--replay", metavar="SIDECAR",
                   help="re-run the command recorded in a JSON sidecar")
    sub = p.add_subparsers(dest="command")
    helps = {
        "check": "validate an automaton (almost semisimple check)",
        "spectral": "growth rate, rho vector, growth classes",
        "sample": "sample chain paths",
        "returns": "first-return law at a recurrent vertex",
        "measure": "counting vs Markov measure on cones",
        "drift": "drift d(x, g x)/n",
        "genericity": "displacement / translation / loxodromic fractions",
        "shadows": "shadow hitting probabilities",
        "gromov": "Gromov product statistics",
        "converge": "Gromov products along paths (convergence proxy)",
        "translation": "translation length growth along paths",
        "describe": "summarise an automaton, chain or action",
    }
    subs = {}
    for name in COMMANDS:
        subs[name] = sub.add_parser(name, parents=[common], help=helps[name])
    subs["returns"].add_argument("--vertex", help="vertex id or name")
    subs["measure"].add_argument("--depth", type=int, default=2)
    subs["measure"].add_argument("--word", help="also report the measures of this word")
    subs["drift"].add_argument("--mode", choices=["enumerate", "montecarlo", "both"],
                               default="both")
    subs["genericity"].add_argument("--L-ref", dest="L_ref", type=float,
                                    help="reference drift (default: Monte Carlo at n=200)")
    subs["genericity"].add_argument("--n-min", type=int, default=1)
    subs["shadows"].add_argument("--r-values", type=_floats, default=[0, 1, 2, 3, 4, 5, 6])
    subs["shadows"].add_argument("--horizon", type=int)
    subs["shadows"].add_argument("--centers", type=int, default=4)
    subs["gromov"].add_argument("--eta", type=float, default=0.25)
    subs["converge"].add_argument("--checkpoints", type=_ints)
    subs["translation"].add_argument("--L", type=float, help="drift (default: Monte Carlo at n=200)")
    subs["describe"].add_argument("--target", choices=["automaton", "chain", "action"],
                                  default="chain")
    return p


def config_from_args(args, argv):
    if args.automaton:
        source = "file:" + os.path.abspath(args.automaton)
    else:
        source = "builtin:" + (args.builtin or "free:2")
    if args.action_file:
        action = {"file": os.path.abspath(args.action_file)}
    else:
        action = {"builtin": args.action or "cayley-tree"}
    params = dict(DEFAULTS.get(args.command, {}))
    for key, value in vars(args).items():
        if key in ("command", "builtin", "automaton", "action", "action_file", "seed",
                   "out", "workers", "plot", "replay"):
            continue
        if value is not None:
            params[key] = value
    return RunConfig(args.command, source, action, params, args.seed,
                     os.path.abspath(args.out), max(1, args.workers), args.plot, list(argv))


def run(cfg):
    """Execute one command; returns the report (or None for describe)."""
    A = load_source(cfg.automaton_source)
    p = cfg.params
    if cfg.command == "check":
        rep, check = check_report(A)
        _emit(rep, cfg)
        if not check:
            raise NotAlmostSemisimple(f"graph is not almost semisimple: {check.reason}")
        return rep
    _validated(A)
    if cfg.command == "spectral":
        return _emit(spectral_report(A, p["n_max"]), cfg)
    if cfg.command == "describe" and p.get("target") == "automaton":
        text, info = describe_text("automaton", A)
        print(text)
        print(json.dumps(info, indent=2, sort_keys=True))
        return None
    chain = build_chain(A)
    if cfg.command == "returns":
        return _emit(returns_report(A, chain, _vertex(A, p.get("vertex")), p["trials"],
                                    cfg.seed, cfg.workers), cfg)
    if cfg.command == "measure":
        word = parse_word(p["word"]) if p.get("word") else None
        return _emit(measure_report(A, chain, p["n_max"], p.get("depth", 2), word), cfg)
    if cfg.command == "describe" and p.get("target") == "chain":
        text, info = describe_text("chain", A, chain)
        print(text)
        print(json.dumps(info, indent=2, sort_keys=True))
        return None
    action = make_action(cfg.action, A)
    s, w = cfg.seed, cfg.workers
    if cfg.command == "describe":
        text, info = describe_text("action", A, chain, action)
        print(text)
        print(json.dumps(info, indent=2, sort_keys=True))
        return None
    if cfg.command == "sample":
        rep = sample_report(A, chain, action, p["n"], p["trials"], s, w)
    elif cfg.command == "drift":
        modes = ["enumerate", "montecarlo"] if p["mode"] == "both" else [p["mode"]]
        parts = [drift(A, chain, action, m, p["n"], p["trials"], s, w) for m in modes]
        rep = parts[0]
        for extra in parts[1:]:
            rep.rows += extra.rows
        rep.params["mode"] = p["mode"]
        if len(parts) == 2:
            mc = parts[1].summary
            rep.summary = {"enumerate_mean": parts[0].summary["mean"],
                           "montecarlo_mean": mc["mean"], "montecarlo_se": mc["se"]}
    elif cfg.command == "genericity":
        L = p.get("L_ref")
        if L is None:
            L = drift(A, chain, action, "montecarlo", 200, max(1000, p["trials"]), s,
                      w).summary["mean"]
        rep = genericity_scan(A, action, p["n_max"], p["epsilon"], L,
                              n_min=p.get("n_min", 1), workers=w)
    elif cfg.command == "shadows":
        rep = shadow_decay_scan(chain, action, p["r_values"], p["horizon"], p["trials"], s,
                                centers=p.get("centers", 4), workers=w)
    elif cfg.command == "gromov":
        rep = gromov_product_stats(A, chain, action, p["n"], p["trials"], s,
                                   eta=p.get("eta", 0.25), workers=w)
    elif cfg.command == "converge":
        rep = boundary_convergence_diag(chain, action, p["n"], p.get("checkpoints"),
                                        p["trials"], s, workers=w)
    elif cfg.command == "translation":
        rep = translation_growth_mc(chain, action, p["n"], max(1000, p["trials"]), s,
                                    p["epsilon"], L=p.get("L"), workers=w)
    else:
        raise ValueError(f"unknown command {cfg.command!r}")
    return _emit(rep, cfg, action)


def _emit(rep, cfg, action=None):
    extra = {"automaton_source": cfg.automaton_source, "params_cli": cfg.params}
    if action is not None:
        extra["action_config"] = action.config()
    csv_path, json_path = write_report(rep, cfg.out, cfg.seed, cfg.argv, extra)
    print(f"wrote {csv_path} ({len(rep.rows)} rows) and {json_path}")
    for key, value in rep.summary.items():
        print(f"  {key}: {format_value(value)}")
    if cfg.plot:
        from .plotting import plot_report
        png = os.path.splitext(csv_path)[0] + ".png"
        plot_report(rep, png)
        print(f"wrote {png}")
    return rep


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.replay:
        with open(args.replay) as fh:
            argv = json.load(fh)["command"]
        args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return 1
    try:
        run(config_from_args(args, argv))
    except ValidationError as exc:
        print(f"validation failed ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 2
    except (LoxolabError, OSError, ValueError) as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
