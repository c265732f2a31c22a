"""Command-line front end.

Every CSV starts with a ``# config {...}`` line holding the resolved
configuration as JSON; passing that CSV back through ``--config`` reruns it.
Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

import argparse
import json
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional

import numpy as np

from .channels import DampingModel, NonCPWarning, QbmModel
from .exceptions import NumericalError, ValidationError
from .gaussian import TOL_PSD, bona_fide_eigenvalues, mean_excitations, mts_at_energy, random_states, sts_at_energy
from .gip import gip_general
from .io import read_covariance
from .nonmarkov import default_grid, divisibility_ND, measure, time_grid, witness_batch

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ROW_HEADER = "alpha,nbar,T,w0,wc,probe,NQ_sigma,ND"
COEFF_HEADER = "t,delta,gamma,delta_plus_gamma_over_2,delta_minus_gamma_over_2"
MAX_CELLS = 100_000


@dataclass
class RunConfig:
    command: str = ""
    model: str = "damping"
    alpha: List[float] = field(default_factory=lambda: [0.1])
    nbar: List[float] = field(default_factory=lambda: [1.0])
    T: float = 0.0
    omega0: float = 4.0
    omegac: float = 1.0
    probe: List[str] = field(default_factory=lambda: ["sts"])
    k: float = 1.0
    t_max: Optional[float] = None
    dt: Optional[float] = None
    eps: float = 1e-5
    seed: int = 0
    random: int = 0
    n_random: int = 200
    qbm_lambda2_literal: bool = False
    jobs: int = 1
    out: Optional[str] = None

    def validate(self):
        if self.model not in ("damping", "qbm"):
            raise ValidationError(f"model must be 'damping' or 'qbm', got {self.model!r}")
        for a in self.alpha:
            if not a >= 0:
                raise ValidationError(f"alpha must be non-negative, got {a}")
        for n in self.nbar:
            if not n > 0:
                raise ValidationError(f"nbar must be positive, got {n}")
        if not self.T >= 0 or not self.omega0 > 0 or not self.omegac > 0:
            raise ValidationError("need T >= 0, w0 > 0 and wc > 0")
        if not self.k >= 1:
            raise ValidationError(f"probe mixedness k must be >= 1, got {self.k}")
        if not self.eps > 0:
            raise ValidationError(f"eps must be positive, got {self.eps}")
        if self.random < 0 or self.jobs < 1:
            raise ValidationError("--random must be >= 0 and --jobs >= 1")
        for p in self.probe:
            if p not in ("sts", "mts", "random") and not p.startswith("file:"):
                raise ValidationError(f"unknown probe {p!r} (sts | mts | random | file:<path>)")
        cells = len(self.alpha) * len(self.nbar) * (len(self.probe) + self.random)
        if cells > MAX_CELLS:
            warnings.warn(f"sweep has {cells} cells", stacklevel=2)
        return self

    def echo(self):
        return "# config " + json.dumps(asdict(self), sort_keys=True)


def _float_list(text):
    """``a,b,c`` or ``lo:hi:n`` (n evenly spaced values)."""
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, list):
        return [float(v) for v in text]
    text = str(text).strip()
    try:
        if ":" in text:
            lo, hi, n = text.split(":")
            return [float(v) for v in np.linspace(float(lo), float(hi), int(n))]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse {text!r} as a list of reals") from None


def _str_list(text):
    if isinstance(text, list):
        return [str(v) for v in text]
    return [v.strip() for v in str(text).split(",") if v.strip()]


_ALIASES = {"temp": "T", "w0": "omega0", "wc": "omegac", "tmax": "t_max", "lambda2_literal": "qbm_lambda2_literal"}


def load_config(path):
    """Read a TOML or JSON file, or the ``# config`` echo line of a CSV produced by this tool."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        if path.suffix.lower() == ".toml":
            data = tomllib.loads(text)
        elif path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            first = text.splitlines()[0] if text else ""
            if not first.startswith("# config "):
                raise ValidationError(f"{path}: no '# config' line found")
            data = json.loads(first[len("# config "):])
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"{path}: {exc}") from None
    known = {f.name for f in fields(RunConfig)}
    out = {}
    for key, value in data.items():
        key = _ALIASES.get(key.replace("-", "_"), key.replace("-", "_"))
        if key not in known:
            raise ValidationError(f"{path}: unknown config key {key!r}")
        out[key] = value
    return out


def resolve_config(args):
    values = {}
    if getattr(args, "config", None):
        values.update(load_config(args.config))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    values["command"] = args.command
    if args.command == "qbm-sweep" or args.command == "coeffs":
        values["model"] = "qbm"
        values.setdefault("nbar", [2.5])
        values.setdefault("probe", ["sts", "mts"])
    if args.command == "damping-sweep":
        values["model"] = "damping"
    for key in ("alpha", "nbar"):
        if key in values:
            values[key] = _float_list(values[key])
    if "probe" in values:
        values["probe"] = _str_list(values["probe"])
    cfg = RunConfig(**values)
    return cfg.validate()


def make_model(cfg, alpha):
    if cfg.model == "qbm":
        return QbmModel(alpha=alpha, T=cfg.T, omega0=cfg.omega0, omegac=cfg.omegac,
                        lambda2_literal=cfg.qbm_lambda2_literal)
    return DampingModel(alpha=alpha)


def _grid(cfg, model):
    t_max, dt = default_grid(model)
    return (cfg.t_max if cfg.t_max is not None else t_max), (cfg.dt if cfg.dt is not None else dt)


def _probe(cfg, name, nbar, rng_seed):
    """Return ``(label, sigma, nbar)``."""
    if name == "sts":
        return "sts", sts_at_energy(nbar, cfg.k), nbar
    if name == "mts":
        return "mts", mts_at_energy(nbar, cfg.k), nbar
    if name == "random":
        return "random:" + "-".join(str(v) for v in rng_seed), random_states(nbar, 1, rng_seed)[0], nbar
    sigma = read_covariance(name[len("file:"):])
    return name, sigma, mean_excitations(sigma).nbar


def _fmt(v):
    return "" if v is None else format(float(v), ".12g")


def _row(cfg, alpha, nbar, label, nq, nd):
    qbm = cfg.model == "qbm"
    cells = [
        _fmt(alpha), _fmt(nbar),
        _fmt(cfg.T if qbm else None), _fmt(cfg.omega0 if qbm else None), _fmt(cfg.omegac if qbm else None),
        label, _fmt(nq), _fmt(nd),
    ]
    return ",".join(cells)


def _map(cfg, fn, items):
    """Run ``fn`` over ``items`` (possibly concurrently) and keep input order."""
    if cfg.jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def sweep_rows(cfg):
    """Rows over alpha x nbar x probes (then ``cfg.random`` random probes per cell)."""
    cells = [(i, a, j, n) for i, a in enumerate(cfg.alpha) for j, n in enumerate(cfg.nbar)]

    def run_cell(cell):
        i, alpha, j, nbar = cell
        model = make_model(cfg, alpha)
        t_max, dt = _grid(cfg, model)
        probes = []
        for name in cfg.probe:
            probes.append(_probe(cfg, name, nbar, [cfg.seed, i, j]))
        for r in range(cfg.random):
            probes.append(_probe(cfg, "random", nbar, [cfg.seed, i, j, r]))
        times = time_grid(t_max, dt)
        lams = model.lambdas(times)
        nq = witness_batch(model, np.stack([p[1] for p in probes]), t_max, dt, lambdas=lams)
        nd = divisibility_ND(model, t_max, dt, cfg.eps).ND
        return [_row(cfg, alpha, p[2], p[0], q, nd) for p, q in zip(probes, nq)]

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonCPWarning)
        out = _map(cfg, run_cell, cells)
    return [r for rows in out for r in rows]


def coeff_rows(cfg):
    model = make_model(cfg, cfg.alpha[0])
    t_max = cfg.t_max if cfg.t_max is not None else 15.0
    dt = cfg.dt if cfg.dt is not None else 0.01
    t = time_grid(t_max, dt)
    d, g = np.atleast_1d(model.delta(t)), np.atleast_1d(model.gamma(t))
    return [",".join(_fmt(v) for v in row) for row in zip(t, d, g, (d + g) / 2, (d - g) / 2)]


def measure_rows(cfg):
    cells = [(a, n) for a in cfg.alpha for n in cfg.nbar]

    def run_cell(cell):
        alpha, nbar = cell
        model = make_model(cfg, alpha)
        t_max, dt = _grid(cfg, model)
        res = measure(model, nbar, n_random=cfg.n_random, seed=cfg.seed, t_max=t_max, dt=dt)
        p = res.argmax_probe
        label = f"{res.probe_family.value}[a={p.a:.10g};b={p.b:.10g};c={p.c:.10g};d={p.d:.10g}]"
        nd = divisibility_ND(model, t_max, dt, cfg.eps).ND
        return _row(cfg, alpha, nbar, label, res.NQ, nd)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonCPWarning)
        return _map(cfg, run_cell, cells)


def _emit(cfg, header, rows):
    text = "\n".join([cfg.echo(), header, *rows]) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_gip(args):
    sigma = read_covariance(args.file)
    q = gip_general(_bona_fide(sigma, args.file))
    print(format(q, ".12g"))


def _bona_fide(sigma, source):
    lo = bona_fide_eigenvalues(sigma)[0]
    if lo < -TOL_PSD:
        raise ValidationError(f"{source}: covariance matrix violates the uncertainty relation "
                              f"(min eigenvalue of sigma + i Omega = {lo:.3e})")
    return sigma


def cmd_sweep(args):
    cfg = resolve_config(args)
    _emit(cfg, ROW_HEADER, sweep_rows(cfg))


def cmd_coeffs(args):
    cfg = resolve_config(args)
    _emit(cfg, COEFF_HEADER, coeff_rows(cfg))


def cmd_measure(args):
    cfg = resolve_config(args)
    _emit(cfg, ROW_HEADER, measure_rows(cfg))


def _add_run_flags(p, model_flag=False):
    p.add_argument("--config", help="TOML/JSON file, or a CSV produced by this tool")
    if model_flag:
        p.add_argument("--model", choices=("damping", "qbm"))
    p.add_argument("--alpha", type=_float_list, help="coupling(s): a,b,c or lo:hi:n")
    p.add_argument("--nbar", type=_float_list, help="mean excitations per mode")
    p.add_argument("--temp", dest="T", type=float, help="bath temperature (units of wc)")
    p.add_argument("--w0", dest="omega0", type=float, help="system frequency")
    p.add_argument("--wc", dest="omegac", type=float, help="bath cutoff")
    p.add_argument("--probe", type=_str_list, help="sts, mts, random or file:<path> (comma list)")
    p.add_argument("--k", type=float, help="probe mixedness k1/k2")
    p.add_argument("--tmax", dest="t_max", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--eps", type=float, help="divisibility increment")
    p.add_argument("--seed", type=int)
    p.add_argument("--random", type=int, metavar="N", help="add N random probes per cell")
    p.add_argument("--n-random", dest="n_random", type=int, help="random restarts in measure")
    p.add_argument("--lambda2-literal", dest="qbm_lambda2_literal", action="store_const", const=True,
                   help="QBM noise term without the factor 2")
    p.add_argument("--jobs", type=int, help="concurrent sweep cells")
    p.add_argument("--out", help="output path (default stdout)")


def build_parser():
    parser = argparse.ArgumentParser(prog="cvnonmarkov", description="Gaussian non-Markovianity indicators")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gip", help="interferometric power of a covariance file")
    p.add_argument("file", help="JSON {\"sigma\": [[...]]} or CSV with 16 reals")
    p.set_defaults(func=cmd_gip)

    p = sub.add_parser("damping-sweep", help="witness and N_D under the damping channel")
    _add_run_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("qbm-sweep", help="witness and N_D under quantum Brownian motion")
    _add_run_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("coeffs", help="QBM coefficients Delta(t), gamma(t)")
    _add_run_flags(p)
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("witness", help="witness and N_D for one model and probe set")
    _add_run_flags(p, model_flag=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("measure", help="witness maximised over probes at fixed energy")
    _add_run_flags(p, model_flag=True)
    p.set_defaults(func=cmd_measure)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
