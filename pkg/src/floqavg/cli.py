"""Command-line front end; every subcommand writes one CSV table.

Exit status: 0 on success, 1 for invalid configuration, 2 when a solver fails.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .average_energy import build_eigenspace
from .core import FloquetError, SolverError, StateVector, ToleranceConfig
from .dynamics import (
    boundary_report,
    decomposed_average_energy,
    evolve,
    finite_spectrum,
    infinite_spectrum,
    observed_average_energy,
)
from .io import atomic_write, dumps_hamiltonian, format_csv, load_hamiltonian
from .ritz import RitzNotConverged, ritz_solve
from .twolevel import TwoLevelParams, theta_state, theta_unperturbed_average

THREADS_ENV = "FLOQAVG_NUM_THREADS"
COMMANDS = ("solve", "spectrum", "observed", "boundaries", "ritz", "propagate", "dump")


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _complex_list(text: str) -> np.ndarray:
    try:
        return np.array([complex(s.strip().replace(" ", "")) for s in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated complex numbers, got {text!r}")


def _positive(text: str) -> float:
    x = float(text)
    if not x > 0 or not math.isfinite(x):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return x


def _add_common(p: argparse.ArgumentParser):
    src = p.add_argument_group("Hamiltonian")
    src.add_argument("--model", choices=["twolevel"], help="builtin model")
    src.add_argument("--input", help="Hamiltonian spec file (JSON)")
    src.add_argument("--V", type=float, default=None,
                     help="drive strength (default: first resonance)")
    src.add_argument("--omega", type=_positive, default=1.5)
    src.add_argument("--omega0", type=float, default=1.0)
    src.add_argument("--v", type=float, default=0.0, help="static perturbation strength")
    tol = p.add_argument_group("tolerances")
    tol.add_argument("--xi", type=_positive, default=1e-2)
    tol.add_argument("--cutoff", type=int, default=8)
    tol.add_argument("--dedup-overlap", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default=None, help="output CSV (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="floqavg", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"floqavg {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="ordered eigenbasis (quasi-energy, average energy)")
    _add_common(p)

    p = sub.add_parser("spectrum", help="energy spectrum of an eigenstate or a state")
    _add_common(p)
    p.add_argument("--state", type=int, default=0, help="eigenstate index (ordered basis)")
    p.add_argument("--psi", type=_complex_list, help="initial state instead of --state")
    p.add_argument("--script-t", type=_positive, help="averaging time; omit for line spectrum")
    p.add_argument("--emin", type=float, default=-3.0)
    p.add_argument("--emax", type=float, default=3.0)
    p.add_argument("--points", type=int, default=601)
    p.add_argument("--min-weight", type=float, default=1e-14)

    p = sub.add_parser("observed", help="finite-time observed average energy")
    _add_common(p)
    p.add_argument("--script-t", type=_positive, nargs="+", required=True)
    p.add_argument("--theta-points", type=int, default=None,
                   help="two-level theta landscape with this many points in [0, pi)")
    p.add_argument("--psi", type=_complex_list, help="initial state (normalized)")

    p = sub.add_parser("boundaries", help="averaging-time window [t_min, t_max]")
    _add_common(p)
    p.add_argument("--perturbation", help="perturbation spec file (with --input)")

    p = sub.add_parser("ritz", help="Floquet-Ritz ground-state trace")
    _add_common(p)
    p.add_argument("--guess", type=_complex_list, default=None)
    p.add_argument("--max-iter", type=int, default=200)

    p = sub.add_parser("propagate", help="time evolution of a state")
    _add_common(p)
    p.add_argument("--psi", type=_complex_list, required=True)
    p.add_argument("--t-start", type=float, default=0.0)
    p.add_argument("--t-stop", type=float, required=True)
    p.add_argument("--t-points", type=int, default=101)

    p = sub.add_parser("dump", help="write the Hamiltonian as a spec file")
    _add_common(p)
    return ap


def _twolevel(args) -> TwoLevelParams:
    if args.V is None:
        delta = args.omega - args.omega0
        if abs(delta) > args.omega:
            raise ConfigError("no first resonance for these frequencies; pass --V")
        return TwoLevelParams.first_resonance(args.omega0, args.omega, args.v)
    return TwoLevelParams(args.omega0, args.omega, args.V, args.v)


def _hamiltonian(args):
    if (args.model is None) == (args.input is None):
        raise ConfigError("give exactly one of --model or --input")
    if args.model:
        return _twolevel(args).hamiltonian()
    return load_hamiltonian(args.input)


def _config(args) -> ToleranceConfig:
    try:
        return ToleranceConfig(xi=args.xi, fourier_cutoff=args.cutoff,
                               dedup_overlap=args.dedup_overlap)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _metadata(args) -> list[str]:
    echo = {k: (v.tolist() if isinstance(v, np.ndarray) else v)
            for k, v in sorted(vars(args).items()) if k != "output"}
    echo = {k: ([str(c) for c in v] if isinstance(v, list) and v and isinstance(v[0], complex)
                else v) for k, v in echo.items()}
    return [f"floqavg {__version__}", f"command: {args.command}",
            "config: " + json.dumps(echo, sort_keys=True)]


def _state(args, dim: int) -> StateVector:
    if args.psi is None:
        raise ConfigError("--psi is required")
    if args.psi.size != dim:
        raise ConfigError(f"--psi has {args.psi.size} entries, Hamiltonian dim is {dim}")
    if not np.linalg.norm(args.psi) > 0:
        raise ConfigError("--psi must be nonzero")
    return StateVector.normalize(args.psi)


def _workers() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(n, 1)


def cmd_solve(args):
    es = build_eigenspace(_hamiltonian(args), _config(args))
    rows = [(i, t.quasi_energy, t.avg_energy, -1 if t.resonance_group is None else t.resonance_group)
            for i, t in enumerate(es)]
    return ["index", "quasi_energy", "avg_energy", "group_id"], rows


def cmd_spectrum(args):
    h = _hamiltonian(args)
    es = build_eigenspace(h, _config(args))
    if args.script_t is None:
        if args.psi is not None:
            raise ConfigError("--psi needs --script-t (line spectra are per eigenstate)")
        if not 0 <= args.state < len(es):
            raise ConfigError(f"--state must lie in [0, {len(es) - 1}]")
        lines = infinite_spectrum(es[args.state], min_weight=args.min_weight)
        return ["energy", "weight"], [(ln.energy, ln.weight) for ln in lines]
    if args.points < 1:
        raise ConfigError("--points must be >= 1")
    if args.psi is not None:
        psi = _state(args, h.dim)
    else:
        if not 0 <= args.state < len(es):
            raise ConfigError(f"--state must lie in [0, {len(es) - 1}]")
        psi = StateVector.normalize(es[args.state].function.initial())
    grid = np.linspace(args.emin, args.emax, args.points)
    spec = finite_spectrum(es, psi, args.script_t, grid)
    return ["energy", "value"], list(zip(spec.energies, spec.values))


def cmd_observed(args):
    h = _hamiltonian(args)
    es = build_eigenspace(h, _config(args))
    if args.theta_points is not None:
        if args.model != "twolevel":
            raise ConfigError("--theta-points needs --model twolevel")
        if args.theta_points < 1:
            raise ConfigError("--theta-points must be >= 1")
        p = _twolevel(args)
        thetas = np.linspace(0, np.pi, args.theta_points, endpoint=False)
        jobs = [(th, theta_state(p, th), tt) for tt in args.script_t for th in thetas]

        def work(job):
            th, psi, tt = job
            return (th, tt, observed_average_energy(es, psi, tt),
                    decomposed_average_energy(es, psi, tt),
                    float(theta_unperturbed_average(p, th)))

        with ThreadPoolExecutor(max_workers=_workers()) as pool:
            rows = list(pool.map(work, jobs))
        return ["theta", "script_t", "observed", "decomposed", "unperturbed_infinite"], rows
    psi = _state(args, h.dim)
    rows = [(tt, observed_average_energy(es, psi, tt), decomposed_average_energy(es, psi, tt))
            for tt in args.script_t]
    return ["script_t", "observed", "decomposed"], rows


def cmd_boundaries(args):
    cfg = _config(args)
    if args.model:
        if args.perturbation:
            raise ConfigError("--perturbation is only used with --input")
        p = _twolevel(args)
        ref, pert = p.unperturbed().hamiltonian(), p.perturbation()
    else:
        if not args.input or not args.perturbation:
            raise ConfigError("give --model, or --input with --perturbation")
        ref, pert = load_hamiltonian(args.input), load_hamiltonian(args.perturbation)
        if pert.dim != ref.dim:
            raise ConfigError("perturbation dimension does not match the Hamiltonian")
    rep = boundary_report(build_eigenspace(ref, cfg), pert, cfg.xi)
    mi = rep.min_indices or (-1, -1, 0)
    ma = rep.max_pair or (-1, -1)
    row = (rep.t_min, rep.t_max, rep.t_min_raw, rep.crossed, *mi, *ma)
    return ["t_min", "t_max", "t_min_raw", "crossed", "min_m", "min_n", "min_l",
            "max_a", "max_b"], [row]


def cmd_ritz(args):
    h = _hamiltonian(args)
    guess = args.guess
    if guess is not None and guess.size != h.dim:
        raise ConfigError(f"--guess has {guess.size} entries, Hamiltonian dim is {h.dim}")
    res = ritz_solve(h, _config(args), guess, max_iterations=args.max_iter, seed=args.seed)
    return _ritz_table(res.history)


def _ritz_table(history):
    rows = [(it.iteration, it.basis_size, it.residual_norm, it.candidate.quasi_energy,
             it.candidate.avg_energy, it.avg_change, it.coupling_norm, it.converged,
             it.flip_flop, it.random_restart, it.thick_restart) for it in history]
    return ["iteration", "basis_size", "residual_norm", "quasi_energy", "avg_energy",
            "avg_change", "coupling_norm", "converged", "flip_flop", "random_restart",
            "thick_restart"], rows


def cmd_propagate(args):
    h = _hamiltonian(args)
    if args.t_points < 1:
        raise ConfigError("--t-points must be >= 1")
    es = build_eigenspace(h, _config(args))
    psi0 = _state(args, h.dim)
    times = np.linspace(args.t_start, args.t_stop, args.t_points)
    psi = evolve(es, psi0, times)
    header = ["t"] + [f"{part}{i}" for i in range(h.dim) for part in ("re", "im", "pop")]
    rows = []
    for t, row in zip(times, psi):
        cells = [t]
        for c in row:
            cells += [c.real, c.imag, abs(c) ** 2]
        rows.append(cells)
    return header, rows


HANDLERS = {"solve": cmd_solve, "spectrum": cmd_spectrum, "observed": cmd_observed,
            "boundaries": cmd_boundaries, "ritz": cmd_ritz, "propagate": cmd_propagate}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "dump":
            atomic_write(args.output, dumps_hamiltonian(_hamiltonian(args)))
            return 0
        header, rows = HANDLERS[args.command](args)
        atomic_write(args.output, format_csv(header, rows, _metadata(args)))
        return 0
    except RitzNotConverged as exc:
        header, rows = _ritz_table(exc.history)
        if args.output not in (None, "-"):
            atomic_write(args.output, format_csv(header, rows, _metadata(args)
                                                 + ["status: not converged"]))
        print(f"floqavg: solver failure: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"floqavg: solver failure: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, FloquetError, ValueError, OSError) as exc:
        print(f"floqavg: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
