"""Command-line experiment runner.

Every subcommand reads an optional INI config (sections and keys listed in
``config_schema.json``), accepts ``--set section.key=value`` overrides, prints
a short summary and optionally writes a CSV or JSON report.

Exit codes: 0 pass, 1 a bound or tolerance failed, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import re
import sys
from importlib import resources

import numpy as np

from . import contour, dobrushin, gibbs, interaction, lattice, montecarlo, thermo
from .gibbs import BoundaryCondition
from .report import ExperimentReport, fmt

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
THREADS_ENV = "GIBBSLAB_THREADS"


class ConfigError(Exception):
    pass


def load_schema() -> dict:
    return json.loads(resources.files("gibbslab").joinpath("config_schema.json").read_text())


# -- config parsing ---------------------------------------------------------------

def _ints(text):
    return tuple(int(t) for t in text.split(",") if t.strip())


def _point(text):
    p = _ints(text)
    if not p:
        raise ValueError(f"empty point {text!r}")
    return p


def _points(text):
    return [_point(t) for t in text.split(";") if t.strip()]


def _spins(text):
    out = {}
    for item in text.split(";"):
        if not item.strip():
            continue
        pt, sep, s = item.rpartition(":")
        if not sep or int(s) not in (1, -1):
            raise ValueError(f"expected point:spin with spin +-1, got {item.strip()!r}")
        out[_point(pt)] = int(s)
    return out


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_CONVERTERS = {
    "int": int, "float": float, "bool": _bool, "str": str, "ints": _ints,
    "floats": lambda t: tuple(float(x) for x in t.split(",") if x.strip()),
    "points": _points, "spins": _spins,
    "interiors": lambda t: [_points(g) for g in t.split("|") if g.strip()],
}


def _line_of(text: str, section: str, key: str) -> int | None:
    current = None
    for no, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
        elif current == section and re.match(rf"\s*{re.escape(key)}\s*[=:]", line):
            return no
    return None


def parse_config(text: str, overrides=(), source: str = "<config>") -> dict:
    """Typed ``{section: {key: value}}`` after validation against the schema."""
    schema = load_schema()["sections"]
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}".replace("\n", " ")) from None
    raw = {s: dict(cp[s]) for s in cp.sections()}
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, name = key.partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {item!r} is not section.key=value")
        raw.setdefault(section.strip(), {})[name.strip()] = value.strip()
    out = {}
    for section, items in raw.items():
        if section not in schema:
            raise ConfigError(f"{source}: unknown section [{section}]")
        out[section] = {}
        for key, value in items.items():
            where = _line_of(text, section, key)
            loc = f"{source}:{where}" if where else source
            entry = schema[section].get(key)
            if entry is None:
                raise ConfigError(f"{loc}: unknown key '{key}' in section [{section}]")
            if entry["type"] == "choice":
                if value not in entry["choices"]:
                    raise ConfigError(f"{loc}: key '{key}' in [{section}] must be one of "
                                      f"{', '.join(entry['choices'])}; got {value!r}")
                out[section][key] = value
                continue
            try:
                out[section][key] = _CONVERTERS[entry["type"]](value)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{loc}: invalid value for key '{key}' in [{section}]: {exc}") from None
    return out


def get(cfg: dict, section: str, key: str, default=None):
    return cfg.get(section, {}).get(key, default)


# -- building objects from config ---------------------------------------------------

def build_interaction(cfg: dict) -> interaction.Interaction:
    kind = get(cfg, "interaction", "kind", "ising")
    d = get(cfg, "interaction", "dimension", 2)
    beta = get(cfg, "interaction", "beta", 1.0)
    if kind == "file":
        path = get(cfg, "interaction", "file")
        if not path:
            raise ConfigError("key 'file' in [interaction] is required for kind=file")
        try:
            with open(path) as fh:
                return interaction.loads(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read interaction file: {exc}") from None
    if kind == "zero":
        return interaction.zero(d)
    if kind == "ising":
        return interaction.ising(beta, d)
    if kind == "ising_field":
        return interaction.ising_with_field(beta, get(cfg, "interaction", "field", 0.0), d)
    kernel = _power_law(cfg, d)
    if kind == "power_law":
        return kernel
    return interaction.add(interaction.ising(beta, d), kernel.scaled(beta))


def _power_law(cfg: dict, d: int) -> interaction.Interaction:
    exponent = get(cfg, "interaction", "exponent", 5.0)
    radius = get(cfg, "interaction", "kernel_radius", 4)
    norm = get(cfg, "interaction", "kernel_norm", "inf")
    target = get(cfg, "interaction", "decay_norm")
    if target is not None:
        unit = interaction.norm_decay(interaction.power_law(1.0, exponent, d, radius, norm)).mid
        amplitude = target / unit
    else:
        amplitude = get(cfg, "interaction", "amplitude", 0.0)
    return interaction.power_law(amplitude, exponent, d, radius, norm)


def build_perturbation(cfg: dict, d: int) -> interaction.Interaction:
    kind = get(cfg, "perturbation", "kind", "none")
    rng = np.random.default_rng(get(cfg, "perturbation", "seed", 0))
    target = get(cfg, "perturbation", "norm_abs")
    if kind == "none":
        return interaction.zero(d)
    if kind == "file":
        path = get(cfg, "perturbation", "file")
        if not path:
            raise ConfigError("key 'file' in [perturbation] is required for kind=file")
        try:
            with open(path) as fh:
                psi = interaction.loads(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read perturbation file: {exc}") from None
    elif kind == "ising":
        psi = interaction.ising(get(cfg, "perturbation", "beta", 0.1), d)
    elif kind == "nn_noise":
        psi = interaction.symmetric_nn_noise(rng, d, 0.1 if target is None else target)
    else:
        psi = interaction.random_interaction(
            rng, d, get(cfg, "perturbation", "shapes", 3), get(cfg, "perturbation", "max_sites", 3),
            get(cfg, "perturbation", "max_diam", 1), 1.0,
            get(cfg, "perturbation", "symmetric", False), get(cfg, "perturbation", "l1_connected", False))
    if target is not None:
        psi = interaction.with_norm_abs(psi, target)
    return psi


def build_volume(cfg: dict, d: int) -> lattice.SiteSet:
    n = get(cfg, "volume", "n")
    if n is not None:
        return lattice.Rectangle.centered(n, d).site_set()
    sides = get(cfg, "volume", "sides", (3,) * d)
    lo = get(cfg, "volume", "lo")
    if len(sides) != d or (lo is not None and len(lo) != d):
        raise ConfigError(f"volume dimension does not match interaction dimension {d}")
    return lattice.Rectangle.box(sides, lo).site_set()


def build_boundary(cfg: dict, default: str = "plus") -> BoundaryCondition:
    kind = get(cfg, "boundary", "kind", default)
    if kind == "plus":
        return BoundaryCondition.plus()
    if kind == "minus":
        return BoundaryCondition.minus()
    if kind == "free":
        return BoundaryCondition.free()
    return BoundaryCondition.explicit(get(cfg, "boundary", "base", 1), get(cfg, "boundary", "deviations", {}))


def _radius(cfg):
    return get(cfg, "run", "truncation_radius")


def _interval(iv) -> dict:
    return {"lo": iv.lo, "hi": iv.hi}


# -- subcommands ------------------------------------------------------------------

def cmd_norms(cfg, threads):
    phi = build_interaction(cfg)
    norms = interaction.all_norms(phi, get(cfg, "norms", "rel_tol", 1e-6))
    names = {"abs": "normAbs", "decay": "normDecay", "decay_prime": "normDecayPrime", "var": "normVar"}
    rows = [[names[k], iv.lo, iv.hi] for k, iv in norms.items()]
    summary = [f"{n:<16}[{fmt(lo)}, {fmt(hi)}]" for n, lo, hi in rows]
    doc = {names[k]: _interval(iv) for k, iv in norms.items()}
    return ExperimentReport("norms", True, summary, doc, ["norm", "lo", "hi"], rows)


def cmd_dobrushin(cfg, threads):
    phi = build_interaction(cfg)
    rep = dobrushin.full_report(phi, _radius(cfg))
    return ExperimentReport("dobrushin", True, dobrushin.verdict_table(rep).splitlines(), rep.to_dict(),
                            ["site", "rho"],
                            [[" ".join(map(str, x)), v] for x, v in sorted(rep.rho_values.items())])


def cmd_gibbs_exact(cfg, threads):
    phi = build_interaction(cfg)
    vol = build_volume(cfg, phi.dim)
    bc = build_boundary(cfg)
    mu = gibbs.build_gibbs(phi, vol, bc, _radius(cfg), get(cfg, "run", "allow_large", False))
    mags = {" ".join(map(str, x)): gibbs.site_magnetization(mu, x) for x in vol.sites}
    doc = {"volume": [list(p) for p in vol.sites], "boundary": bc.describe(), "logZ": mu.log_z,
           "truncationRadius": mu.truncation_radius, "tailBound": mu.tail_bound, "magnetization": mags}
    rows = [[b, lw, p] for b, lw, p in zip(gibbs.bitstrings(mu.n), mu.log_weights, mu.probs)]
    summary = [f"sites={mu.n} boundary={bc.describe()} logZ={fmt(mu.log_z)}"]
    return ExperimentReport("gibbs-exact", True, summary, doc, ["configuration", "logWeight", "probability"], rows)


def cmd_dlr_check(cfg, threads):
    phi = build_interaction(cfg)
    vol = build_volume(cfg, phi.dim)
    bc = build_boundary(cfg)
    delta = get(cfg, "dlr", "delta") or [lattice.middle_element(vol)]
    tol = get(cfg, "run", "tolerance", 1e-10)
    gap = gibbs.dlr_check(phi, vol, delta, bc, _radius(cfg))
    ok = gap <= tol
    doc = {"delta": [list(p) for p in delta], "maxAbsDifference": gap, "tolerance": tol}
    return ExperimentReport("dlr-check", ok, [f"DLR max |difference| = {fmt(gap)} (tolerance {fmt(tol)})"], doc)


def cmd_rect_equiv(cfg, threads):
    phi0 = build_interaction(cfg)
    psi = build_perturbation(cfg, phi0.dim)
    vol = build_volume(cfg, phi0.dim)
    bc = build_boundary(cfg)
    tol = get(cfg, "run", "tolerance", 1e-10)
    gap = gibbs.gibbs_equivalence_check(phi0, psi, vol, bc, _radius(cfg))
    doc = {"maxAbsDifference": gap, "tolerance": tol,
           "perturbationNormDecayPrime": interaction.norm_decay_prime(psi).hi,
           "rectangleTransformNormAbs": interaction.norm_abs(interaction.rectangle_transform(psi)).hi}
    return ExperimentReport("rect-equiv", gap <= tol,
                            [f"rectangle-hull equivalence max |difference| = {fmt(gap)}"], doc)


def cmd_peierls_verify(cfg, threads):
    d = get(cfg, "interaction", "dimension", 2)
    beta = get(cfg, "interaction", "beta", 1.0)
    psi = build_perturbation(cfg, d)
    delta = get(cfg, "peierls", "delta", 0.1)
    vol = build_volume(cfg, d)
    if get(cfg, "peierls", "sweep", False):
        res = contour.peierls_sweep(beta, psi, delta, vol)
        summary = [f"{res['contours']} contours, {res['pairs']} disjoint pairs; worst ratios "
                   f"{fmt(res['worst_single_ratio'])} (single), {fmt(res['worst_pair_ratio'])} (pair)"]
        return ExperimentReport("peierls-verify", res["passed"], summary, res)
    interiors = get(cfg, "peierls", "contours") or [[lattice.middle_element(vol)]]
    contours = [contour.Contour.from_interior(s) for s in interiors]
    rep = contour.peierls_verify(beta, psi, delta, vol, contours)
    doc = {"contours": [[list(p) for p in g.interior] for g in contours],
           "lengths": [len(g) for g in contours], "lhs": rep.lhs, "rhs": rep.rhs,
           "margin": rep.margin, "truncationTail": rep.tail}
    return ExperimentReport("peierls-verify", rep.passed,
                            [f"lhs={fmt(rep.lhs)} rhs={fmt(rep.rhs)} margin={fmt(rep.margin)}"], doc)


def cmd_contour_census(cfg, threads):
    n_max = get(cfg, "census", "n_max", 12)
    rows = contour.census_rows(n_max)
    ok = all(r["ratio"] <= 1 for r in rows)
    table = [[r["n"], r["count"], r["bound"], r["ratio"]] for r in rows]
    summary = [f"n={r['n']:>3} count={r['count']}" for r in rows]
    return ExperimentReport("contour-census", ok, summary, {"C2": contour.compute_cd(2), "nMax": n_max},
                            ["n", "count", "bound", "ratio"], table)


def cmd_epsilon_scan(cfg, threads):
    d = get(cfg, "epsilon", "dimension", 2)
    step = get(cfg, "epsilon", "step", 0.01)
    count = get(cfg, "epsilon", "count", 400)
    grid = contour.epsilon_grid(d, step, count)
    thr = contour.epsilon_threshold(d, step, count)
    doc = {"dimension": d, "Cd": contour.compute_cd(d), "logCd": math.log(contour.compute_cd(d)),
           "threshold": thr}
    summary = [f"smallest grid L with epsilon(L) < 1/2: {fmt(thr) if thr is not None else 'none'}"]
    return ExperimentReport("epsilon-scan", thr is not None, summary, doc, ["L", "epsilon"],
                            [list(r) for r in grid])


def cmd_pressure_scan(cfg, threads):
    phi = build_interaction(cfg)
    n_max = get(cfg, "pressure", "n_max", 1)
    allow = get(cfg, "run", "allow_large", False)
    reps = [thermo.pressure_estimate(phi, n, _radius(cfg), allow) for n in range(1, n_max + 1)]
    ok = True
    doc = {"interactionId": reps[0].interaction_id, "boundary": "free"}
    summary = [f"n={r.n} perSiteLogZ={fmt(r.log_z_per_site)}" for r in reps]
    if get(cfg, "pressure", "lipschitz", False):
        psi = build_perturbation(cfg, phi.dim)
        delta, bound, ok = thermo.pressure_lipschitz_check(phi, psi, n_max, _radius(cfg), allow)
        doc["lipschitz"] = {"delta": delta, "bound": bound, "pass": ok}
        summary.append(f"|dP| = {fmt(delta)} <= ||psi|| = {fmt(bound)}: {ok}")
    return ExperimentReport("pressure-scan", ok, summary, doc, ["n", "perSiteLogZ", "tailBound"],
                            [[r.n, r.log_z_per_site, r.tail_per_site] for r in reps])


def cmd_variational(cfg, threads):
    phi = build_interaction(cfg)
    n = get(cfg, "variational", "n", 1)
    grid = get(cfg, "variational", "p_grid", tuple(k / 10 for k in range(1, 10)))
    allow = get(cfg, "run", "allow_large", False)
    reps = [thermo.variational_gap(phi, thermo.ProductMeasure(p), n, _radius(cfg), allow) for p in grid]
    best = max(reps, key=lambda r: r.F)
    summary = [f"Pn={fmt(reps[0].Pn)}; max F={fmt(best.F)} at p={fmt(best.p)}"]
    return ExperimentReport("variational", True, summary, {"n": n, "Pn": reps[0].Pn},
                            ["p", "F", "Pn"], [[r.p, r.F, r.Pn] for r in reps])


def _mc_common(cfg):
    sweeps = get(cfg, "mc", "sweeps", 4000)
    burn = get(cfg, "mc", "burn_in", 1000)
    return sweeps, burn, get(cfg, "mc", "thinning", 1)


def cmd_mc_magnetization(cfg, threads):
    phi = build_interaction(cfg)
    vol = build_volume(cfg, phi.dim).hull
    bc = build_boundary(cfg)
    sweeps, burn, thin = _mc_common(cfg)
    site = get(cfg, "mc", "site") or montecarlo.center(vol)
    config = montecarlo.ChainConfig(thermo.interaction_id(phi), vol, bc, _radius(cfg),
                                    get(cfg, "run", "seed", 0), sweeps, burn, thin,
                                    get(cfg, "mc", "initial", "boundary"))
    result = montecarlo.run_chain(phi, config, [site])
    est = montecarlo.estimate_from(result, site, get(cfg, "mc", "batches", montecarlo.MIN_BATCHES))
    path = get(cfg, "mc", "trajectory")
    if path:
        with open(path, "w") as fh:
            montecarlo.write_trajectory_csv(result, fh)
    doc = montecarlo.estimate_json(est, config)
    doc["tailBound"] = result.tail_bound
    summary = [f"site {site}: mean={fmt(est.mean)} se={fmt(est.standard_error)} samples={est.samples}"]
    return ExperimentReport("mc-magnetization", True, summary, doc)


def cmd_coexistence(cfg, threads):
    phi = build_interaction(cfg)
    sweeps, burn, thin = _mc_common(cfg)
    side = get(cfg, "mc", "side", 16)
    seeds = get(cfg, "mc", "seeds", (1, 2, 3, 4))
    res = montecarlo.coexistence_indicator(phi, side, _radius(cfg), seeds, sweeps, burn, thin,
                                           threads, get(cfg, "mc", "initial", "random"),
                                           thermo.interaction_id(phi))
    expect = get(cfg, "mc", "expect", "none")
    if expect == "coexistence":
        ok = res.gap > get(cfg, "mc", "min_gap", 1.5)
    elif expect == "uniqueness":
        ok = abs(res.gap) <= 3 * res.se_gap
    elif expect == "positive":
        ok = res.m_plus > 0 and res.m_minus > 0
    else:
        ok = True
    summary = [f"mPlus={fmt(res.m_plus)} mMinus={fmt(res.m_minus)} gap={fmt(res.gap)} "
               f"(se {fmt(res.se_gap)})"]
    if not res.symmetric:
        summary.append("warning: interaction is not spin-flip symmetric")
    return ExperimentReport("coexistence", ok, summary, montecarlo.coexistence_json(res))


COMMANDS = {
    "norms": (cmd_norms, "interaction norms with tail intervals"),
    "dobrushin": (cmd_dobrushin, "Dobrushin rho sum and variation-norm verdicts"),
    "gibbs-exact": (cmd_gibbs_exact, "exact finite-volume Gibbs state"),
    "dlr-check": (cmd_dlr_check, "DLR consistency of the exact state"),
    "rect-equiv": (cmd_rect_equiv, "rectangle-hull transform equivalence"),
    "peierls-verify": (cmd_peierls_verify, "perturbed Peierls bound by enumeration"),
    "contour-census": (cmd_contour_census, "count contours around the origin"),
    "epsilon-scan": (cmd_epsilon_scan, "epsilon(L) series on a grid"),
    "pressure-scan": (cmd_pressure_scan, "free-boundary pressure on B(n)"),
    "variational": (cmd_variational, "variational functional on product measures"),
    "mc-magnetization": (cmd_mc_magnetization, "heat-bath estimate of a site magnetization"),
    "coexistence": (cmd_coexistence, "plus/minus boundary magnetization gap"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gibbslab", description="Exact and Monte Carlo checks for lattice spin systems.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="INI run config")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("--output", help="write the report here")
        p.add_argument("--format", choices=("csv", "json"), help="report format (default json)")
        p.add_argument("--seed", type=int, help="shorthand for run.seed")
        p.add_argument("--threads", type=int, help=f"worker threads (fallback ${THREADS_ENV})")
    return parser


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV}={env!r} is not an integer") from None
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = COMMANDS[args.command][0]
    try:
        text, source = "", "<config>"
        if args.config:
            source = args.config
            try:
                with open(args.config) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
        overrides = list(args.set)
        if args.seed is not None:
            overrides.append(f"run.seed={args.seed}")
        cfg = parse_config(text, overrides, source)
        threads = resolve_threads(args.threads)
        report = handler(cfg, threads)
    except ConfigError as exc:
        print(f"gibbslab {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"gibbslab {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for line in report.summary:
        print(line)
    print("PASS" if report.passed else "FAIL")
    output = args.output or get(cfg, "run", "output")
    if output:
        form = args.format or get(cfg, "run", "format") or ("csv" if output.endswith(".csv") else "json")
        with open(output, "w") as fh:
            fh.write(report.render(form))
    elif args.format:
        sys.stdout.write(report.render(args.format))
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
