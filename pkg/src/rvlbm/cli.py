"""Command-line driver for the stability experiments.

Subcommands:
    stability table        linear-stability table over the (m, n) rate grid
    stability alpha-sweep  largest stable speed as a function of alpha
    kh scan-ma             largest stable Mach number per mesh
    kh scan-re             largest stable Reynolds number per mesh
    kh scan-utilde         largest stable Mach number per frame scaling c
    kh vorticity           shear-layer roll-up with CSV field dumps

Global flags --config/--out/--threads/--kgrid/--tol work on every
subcommand; values from the flat key-value config file fill in any flag
left unset.  Exit codes: 0 success, 1 invalid configuration, 2 numerical
failure (including a vorticity run that blows up).
"""

import argparse
import logging
import sys

from .collision import UtildePolicy
from .equilibrium import EquilibriumKind
from .errors import DegenerateShiftError, NumericalFailureError
from .experiments import (
    DEFAULT_KH_VARIANTS,
    DEFAULT_UTILDE_VARIANTS,
    KhVariant,
    LinearTemplate,
    SweepCurve,
    alpha_sweep,
    kh_ma_scan,
    kh_re_scan,
    kh_utilde_scan,
    kh_vorticity_run,
    linear_table,
    write_table_csv,
)
from .moments import MomentFamily

logger = logging.getLogger("rvlbm")

DEFAULT_SWEEP_MN = ((0, 3), (3, 0), (0, 7), (7, 0), (7, 7))


class ConfigError(ValueError):
    """Invalid configuration (bad flag value, bad config file, bad combination)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def load_config(path) -> dict:
    """Parse a flat ``key = value`` config file; '#' starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def parse_policy(text: str) -> UtildePolicy:
    t = text.strip()
    if t in ("z", "zero", "0"):
        return UtildePolicy.zero()
    if t in ("u", "V", "v", "fluid"):
        return UtildePolicy.fluid()
    if t.endswith("u"):
        return UtildePolicy.scaled_fluid(float(t[:-1]))
    if t.startswith("w:"):
        wx, wy = t[2:].split(",")
        return UtildePolicy.fixed((float(wx), float(wy)))
    raise ConfigError(f"cannot parse utilde policy {text!r} (expected z, u, <c>u, or w:x,y)")


def parse_kind(text: str) -> EquilibriumKind:
    t = text.strip().lower()
    if t in ("truncated2", "truncated", "trunc"):
        return EquilibriumKind.TRUNCATED2
    if t in ("product4", "product", "prod"):
        return EquilibriumKind.PRODUCT4
    raise ConfigError(f"unknown equilibrium {text!r} (expected truncated2 or product4)")


def parse_family(text: str) -> MomentFamily:
    try:
        return MomentFamily(text.strip().upper())
    except ValueError:
        raise ConfigError(f"unknown moment family {text!r} (expected A or B)") from None


def _non_empty(values: list, text: str) -> list:
    if not values:
        raise ConfigError(f"range {text!r} is empty")
    return values


def parse_int_list(text: str) -> list:
    """Integers as 'a:b' (inclusive), 'a,b,c', or a single value."""
    t = text.strip()
    if ":" in t:
        lo, hi = t.split(":")
        return _non_empty(list(range(int(lo), int(hi) + 1)), text)
    return _non_empty([int(p) for p in t.split(",") if p.strip()], text)


def parse_float_list(text: str) -> list:
    """Floats as 'start:stop:step' (inclusive), 'a,b,c', or a single value."""
    t = text.strip()
    if t.count(":") == 2:
        lo, hi, step = (float(p) for p in t.split(":"))
        if step <= 0:
            raise ConfigError(f"range {text!r} must have a positive step")
        n = int(round((hi - lo) / step))
        return _non_empty([lo + i * step for i in range(n + 1)], text)
    return _non_empty([float(p) for p in t.split(",") if p.strip()], text)


def parse_mesh_list(text: str) -> list:
    """Mesh sizes as '32' or space steps as '1/32', comma separated."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "/" in part:
            num, den = part.split("/")
            out.append(int(round(float(den) / float(num))))
        else:
            out.append(int(part))
    return _non_empty(out, text)


def parse_variant(text: str) -> KhVariant:
    """Variant spec 'alpha=0,utilde=u,eq=truncated2[,family=A]'."""
    fields = {"alpha": 0.0, "utilde": "z", "eq": "truncated2", "family": "A"}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"variant field {part!r} is not key=value")
        key, value = part.split("=", 1)
        key = key.strip()
        if key not in fields:
            raise ConfigError(f"unknown variant field {key!r}")
        fields[key] = value.strip()
    return KhVariant(
        alpha=float(fields["alpha"]),
        policy=parse_policy(fields["utilde"]),
        kind=parse_kind(fields["eq"]),
        family=parse_family(fields["family"]),
    )


def _pick(flag_value, filecfg: dict, key: str, default, cast=lambda x: x):
    """Flag wins over config file wins over the built-in default."""
    if flag_value is not None:
        return flag_value
    if key in filecfg:
        return cast(filecfg[key])
    return default


def _add_common(parser):
    parser.add_argument("--config", help="flat key=value config file supplying unset flags")
    parser.add_argument("--out", help="output path (CSV file, or prefix for field dumps)")
    parser.add_argument("--threads", type=int, help="worker processes for sweeps (default: all cores)")
    parser.add_argument("--kgrid", type=int, help="wavevector grid resolution (default 128)")
    parser.add_argument("--tol", type=float, help="speed scan resolution (default 0.01)")


def build_parser() -> _Parser:
    parser = _Parser(prog="rvlbm", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="group", required=True)

    stab = sub.add_parser("stability", help="linear (von Neumann) stability scans")
    stab_sub = stab.add_subparsers(dest="command", required=True)

    table = stab_sub.add_parser("table", help="largest stable speed over the (m, n) rate grid")
    _add_common(table)
    table.add_argument("--family", help="moment family A or B")
    table.add_argument("--alpha", type=float, help="moment family parameter")
    table.add_argument("--equilibrium", help="truncated2 or product4")
    table.add_argument("--trt", type=int, choices=(1, 2), help="two-relaxation-time layout")
    table.add_argument("--utilde", help="relaxation frame at the linearization point: z, V, <c>u, w:x,y")
    table.add_argument("--theta", type=float, help="linearization direction in radians")
    table.add_argument("--m", help="m values, e.g. 0:7 (s_e = 2 - 2^-m)")
    table.add_argument("--n", help="n values, e.g. 0:7 (s_nu = 2 - 2^-n)")
    table.add_argument("--lam", type=float, help="velocity scale (default 1)")

    sweep = stab_sub.add_parser("alpha-sweep", help="largest stable speed as a function of alpha")
    _add_common(sweep)
    sweep.add_argument("--alphas", help="alpha values, e.g. -1:1:0.25")
    sweep.add_argument("--mn", action="append", help="curve rate pair 'm,n' (repeatable)")
    sweep.add_argument("--family", help="moment family A or B")
    sweep.add_argument("--equilibrium", help="truncated2 or product4")
    sweep.add_argument("--trt", type=int, choices=(1, 2))
    sweep.add_argument("--utilde", help="z, V, <c>u, or w:x,y")
    sweep.add_argument("--theta", type=float)
    sweep.add_argument("--lam", type=float)

    kh = sub.add_parser("kh", help="Kelvin-Helmholtz (nonlinear) experiments")
    kh_sub = kh.add_subparsers(dest="command", required=True)

    ma = kh_sub.add_parser("scan-ma", help="largest stable Mach number per mesh")
    _add_common(ma)
    ma.add_argument("--mesh", help="mesh sizes '32,64' or space steps '1/32,1/64'")
    ma.add_argument("--full", action="store_true", help="include the 1024 mesh (expensive)")
    ma.add_argument("--variant", action="append", help="'alpha=..,utilde=..,eq=..' (repeatable)")
    ma.add_argument("--mu", type=float, help="bulk viscosity (default 0.0366)")
    ma.add_argument("--nu", type=float, help="shear viscosity (default 1e-4)")
    ma.add_argument("--iters", type=int, help="stability horizon in steps (default 2000)")
    ma.add_argument("--ma-cap", type=float, help="scan upper bound (default 1.2)")

    re_ = kh_sub.add_parser("scan-re", help="largest stable Reynolds number per mesh")
    _add_common(re_)
    re_.add_argument("--mesh", help="mesh sizes or space steps")
    re_.add_argument("--variant", action="append")
    re_.add_argument("--ma", type=float, help="Mach number (default 0.09)")
    re_.add_argument("--mu", type=float)
    re_.add_argument("--iters", type=int)
    re_.add_argument("--re-cap", type=float, help="scan upper bound (default 40000)")

    ut = kh_sub.add_parser("scan-utilde", help="largest stable Mach number per frame scaling")
    _add_common(ut)
    ut.add_argument("--n", type=int, help="mesh size (default 128)")
    ut.add_argument("--c", help="frame scalings, e.g. 0:1.4:0.2")
    ut.add_argument("--variant", action="append")
    ut.add_argument("--mu", type=float)
    ut.add_argument("--nu", type=float)
    ut.add_argument("--iters", type=int)

    vort = kh_sub.add_parser("vorticity", help="shear-layer roll-up with field dumps")
    _add_common(vort)
    vort.add_argument("--ma", type=float, help="Mach number (default 0.04)")
    vort.add_argument("--n", type=int, help="mesh size (default 128)")
    vort.add_argument("--times", help="dump times, e.g. 0,0.6,1.0")
    vort.add_argument("--variant", help="'alpha=..,utilde=..,eq=..'")
    vort.add_argument("--mu", type=float)
    vort.add_argument("--nu", type=float)
    return parser


def _cmd_table(args, filecfg):
    template = LinearTemplate(
        family=parse_family(_pick(args.family, filecfg, "family", "A")),
        alpha=_pick(args.alpha, filecfg, "alpha", 0.0, float),
        kind=parse_kind(_pick(args.equilibrium, filecfg, "equilibrium", "truncated2")),
        trt_type=_pick(args.trt, filecfg, "relaxation.type", 1, lambda v: int(str(v).lstrip("trt"))),
        policy=parse_policy(_pick(args.utilde, filecfg, "utilde.policy", "z")),
        theta=_pick(args.theta, filecfg, "experiment.theta", 0.0, float),
        lam=_pick(args.lam, filecfg, "lambda", 1.0, float),
    )
    result = linear_table(
        template,
        m_values=parse_int_list(_pick(args.m, filecfg, "experiment.m", "0:7")),
        n_values=parse_int_list(_pick(args.n, filecfg, "experiment.n", "0:7")),
        tol=_pick(args.tol, filecfg, "tol", 0.01, float),
        kgrid=_pick(args.kgrid, filecfg, "kgrid", 128, int),
        workers=args.threads,
    )
    out = _pick(args.out, filecfg, "out", "linear_table.csv")
    write_table_csv(result, out)
    logger.info("wrote %s in %.1fs", out, result.runtime_s)
    return 0


def _cmd_alpha_sweep(args, filecfg):
    pairs = args.mn or (
        [p.strip() for p in filecfg["experiment.mn"].split(";")] if "experiment.mn" in filecfg else None
    )
    mn = [tuple(int(v) for v in p.split(",")) for p in pairs] if pairs else list(DEFAULT_SWEEP_MN)
    trt_type = _pick(args.trt, filecfg, "relaxation.type", 1, lambda v: int(str(v).lstrip("trt")))
    policy = parse_policy(_pick(args.utilde, filecfg, "utilde.policy", "z"))
    family = parse_family(_pick(args.family, filecfg, "family", "A"))
    curves = [SweepCurve(m, n, trt_type, policy, family) for m, n in mn]
    result = alpha_sweep(
        parse_float_list(_pick(args.alphas, filecfg, "experiment.alphas", "-1:1:0.25")),
        curves,
        kind=parse_kind(_pick(args.equilibrium, filecfg, "equilibrium", "truncated2")),
        theta=_pick(args.theta, filecfg, "experiment.theta", 0.0, float),
        lam=_pick(args.lam, filecfg, "lambda", 1.0, float),
        tol=_pick(args.tol, filecfg, "tol", 0.01, float),
        kgrid=_pick(args.kgrid, filecfg, "kgrid", 128, int),
        workers=args.threads,
    )
    out = _pick(args.out, filecfg, "out", "alpha_sweep.csv")
    write_table_csv(result, out)
    logger.info("wrote %s in %.1fs", out, result.runtime_s)
    return 0


def _variants_from(args, filecfg, default):
    specs = args.variant if getattr(args, "variant", None) else None
    if specs is None and "experiment.variants" in filecfg:
        specs = [p for p in filecfg["experiment.variants"].split(";") if p.strip()]
    if specs is None:
        return default
    return [parse_variant(s) for s in specs]


def _cmd_scan_ma(args, filecfg):
    meshes = parse_mesh_list(_pick(args.mesh, filecfg, "experiment.meshes", "16,32,64,128,256,512"))
    if args.full and 1024 not in meshes:
        meshes.append(1024)
    result = kh_ma_scan(
        meshes,
        variants=_variants_from(args, filecfg, DEFAULT_KH_VARIANTS),
        mu=_pick(args.mu, filecfg, "viscosity.mu", 0.0366, float),
        nu=_pick(args.nu, filecfg, "viscosity.nu", 1e-4, float),
        iters=_pick(args.iters, filecfg, "experiment.iters", 2000, int),
        resolution=_pick(args.tol, filecfg, "tol", 0.01, float),
        ma_cap=_pick(args.ma_cap, filecfg, "experiment.ma_cap", 1.2, float),
        workers=args.threads,
    )
    out = _pick(args.out, filecfg, "out", "kh_ma.csv")
    write_table_csv(result, out)
    logger.info("wrote %s in %.1fs", out, result.runtime_s)
    return 0


def _cmd_scan_re(args, filecfg):
    result = kh_re_scan(
        parse_mesh_list(_pick(args.mesh, filecfg, "experiment.meshes", "16,32,64,128")),
        variants=_variants_from(args, filecfg, DEFAULT_KH_VARIANTS),
        ma=_pick(args.ma, filecfg, "experiment.ma", 0.09, float),
        mu=_pick(args.mu, filecfg, "viscosity.mu", 0.0366, float),
        iters=_pick(args.iters, filecfg, "experiment.iters", 2000, int),
        resolution=_pick(args.tol, filecfg, "tol", 1000.0, float),
        re_cap=_pick(args.re_cap, filecfg, "experiment.re_cap", 40000.0, float),
        workers=args.threads,
    )
    out = _pick(args.out, filecfg, "out", "kh_re.csv")
    write_table_csv(result, out)
    logger.info("wrote %s in %.1fs", out, result.runtime_s)
    return 0


def _cmd_scan_utilde(args, filecfg):
    result = kh_utilde_scan(
        parse_float_list(_pick(args.c, filecfg, "experiment.c", "0:1.4:0.2")),
        variants=_variants_from(args, filecfg, DEFAULT_UTILDE_VARIANTS),
        n=_pick(args.n, filecfg, "grid.n", 128, int),
        mu=_pick(args.mu, filecfg, "viscosity.mu", 0.0366, float),
        nu=_pick(args.nu, filecfg, "viscosity.nu", 1e-4, float),
        iters=_pick(args.iters, filecfg, "experiment.iters", 2000, int),
        resolution=_pick(args.tol, filecfg, "tol", 0.01, float),
        workers=args.threads,
    )
    out = _pick(args.out, filecfg, "out", "kh_utilde.csv")
    write_table_csv(result, out)
    logger.info("wrote %s in %.1fs", out, result.runtime_s)
    return 0


def _cmd_vorticity(args, filecfg):
    spec = args.variant or filecfg.get("experiment.variant", "alpha=0,utilde=u,eq=truncated2")
    outcome, written = kh_vorticity_run(
        ma=_pick(args.ma, filecfg, "experiment.ma", 0.04, float),
        n=_pick(args.n, filecfg, "grid.n", 128, int),
        variant=parse_variant(spec),
        dump_times=parse_float_list(_pick(args.times, filecfg, "experiment.times", "0.6,1.0")),
        prefix=_pick(args.out, filecfg, "out", "kh"),
        mu=_pick(args.mu, filecfg, "viscosity.mu", 0.0366, float),
        nu=_pick(args.nu, filecfg, "viscosity.nu", 1e-4, float),
    )
    for path in written:
        logger.info("wrote %s", path)
    if outcome is not None and not outcome.stable:
        print(
            f"run blew up at iteration {outcome.iteration} ({outcome.reason}); "
            f"{len(written)} dump(s) retained",
            file=sys.stderr,
        )
        return 2
    return 0


_COMMANDS = {
    ("stability", "table"): _cmd_table,
    ("stability", "alpha-sweep"): _cmd_alpha_sweep,
    ("kh", "scan-ma"): _cmd_scan_ma,
    ("kh", "scan-re"): _cmd_scan_re,
    ("kh", "scan-utilde"): _cmd_scan_utilde,
    ("kh", "vorticity"): _cmd_vorticity,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        filecfg = load_config(args.config) if args.config else {}
        return _COMMANDS[(args.group, args.command)](args, filecfg)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalFailureError, DegenerateShiftError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
