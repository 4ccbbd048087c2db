"""Command-line entry point.

    multiscatter --config run.json [--task spectrum|evolve|mint-golden]
                 [--out DIR] [--threads N] [--check]

Exit codes: 0 success, 1 user error (bad config or model), 2 internal error.
Errors are reported as one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, build_system, complex_matrix, parse_config, spec_hash, to_complex
from .dynamics import GroundDensity, effective_generators, evolve, evolve_segments
from .errors import MultiscatterError, SchemaError
from .fields import InputField
from .media import FreeSpace3D, Waveguide1D
from .model import build_manifolds
from .oracle import single_excitation_scattering
from .scattering import spectrum_sweep

CONVENTIONS = {
    "units": "hbar = 1; energies, rates and frequencies in Gamma0; time in 1/Gamma0; positions in carrier wavelengths",
    "detuning": "Delta = omega_drive - omega_transition",
    "amplitudes": "1D detectors report output/input amplitude ratios; entry (g, g_prime) multiplies rho[g_prime, g]",
    "expectation": "sum over (g, g_prime) of amplitude times rho[g_prime, g]",
    "density_csv": "row-major entries, real and imaginary parts interleaved",
}


def _num(x: float) -> str:
    return f"{x:.17e}"


def make_field(spec, omega, drive) -> InputField:
    """Input field from a channel -> amplitude map.

    Waveguide channel ids launch guided plane waves; a free-space channel id
    launches an x-polarised plane wave travelling along +z.
    """
    drive = {ch: to_complex(v) for ch, v in drive.items()}
    envelopes, incident = {}, {}
    for member in spec.medium.members():
        if isinstance(member, Waveguide1D):
            r_ch, l_ch = member.channels
            if r_ch in drive or l_ch in drive:
                f = InputField.waveguide(spec, omega, drive.get(r_ch, 0.0), drive.get(l_ch, 0.0), member)
                envelopes.update(f.envelopes)
                incident.update(f.incident)
        elif isinstance(member, FreeSpace3D) and member.channel in drive:
            f = InputField.plane_wave(spec, omega, drive[member.channel], channel=member.channel)
            envelopes.update(f.envelopes)
    unknown = set(drive) - set(envelopes)
    if unknown:
        raise SchemaError([("drive", f"channels {sorted(unknown)} cannot carry an input field")])
    return InputField(omega, envelopes, incident)


def _metadata(cfg: RunConfig, **extra) -> dict:
    meta = {
        "version": __version__,
        "task": cfg.task,
        "spec_hash": spec_hash(cfg),
        "conventions": CONVENTIONS,
    }
    meta.update(extra)
    return meta


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _unitarity_defect(spec, result):
    members = spec.medium.members()
    if not all(isinstance(m, Waveguide1D) for m in members) or len(members) != 1:
        return None
    if result.basis.n_ground != 1:
        return None
    r_ch, l_ch = members[0].channels
    if r_ch not in result.detectors or l_ch not in result.detectors:
        return None
    t = result.channel(r_ch)
    r = result.channel(l_ch)
    total = np.abs(t) ** 2 + np.abs(r) ** 2
    ok = np.isfinite(total)
    return float(np.max(np.abs(total[ok] - 1.0))) if np.any(ok) else None


def run_spectrum(cfg: RunConfig, out: Path, threads=None) -> dict:
    spec = build_system(cfg.system)
    sc = cfg.spectrum
    basis = build_manifolds(spec)
    rho = None if sc.ground_density is None else complex_matrix(sc.ground_density)
    if rho is not None:
        GroundDensity(rho)
    result = spectrum_sweep(
        spec, sc.detectors, sc.grid(), ground_density=rho,
        drive=lambda w: make_field(spec, w, sc.drive), workers=threads, basis=basis,
    )
    prefix = cfg.output.prefix
    with open(out / f"{prefix}_spectrum.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["omega", "detector", "g", "g_prime", "re", "im", "abs2"])
        for w, det, g, gp, val in result.rows():
            writer.writerow([_num(w), det, g, gp, _num(val.real), _num(val.imag), _num(abs(val) ** 2)])
    with open(out / f"{prefix}_expectation.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["omega", "detector", "re", "im", "abs2"])
        for i, w in enumerate(result.omegas):
            for d, det in enumerate(result.detectors):
                val = complex(result.expectation[i, d])
                writer.writerow([_num(w), det, _num(val.real), _num(val.imag), _num(abs(val) ** 2)])
    defect = _unitarity_defect(spec, result)
    meta = _metadata(
        cfg,
        grid={"start_gamma0": sc.omega_start_gamma0, "stop_gamma0": sc.omega_stop_gamma0, "points": sc.points},
        detectors=list(sc.detectors),
        ground_states=[basis.ground_label(g) for g in range(basis.n_ground)],
        singular_points=result.flagged,
        unitarity_defect=defect,
        unitarity_ok=None if defect is None else bool(defect < cfg.tolerances.unitarity),
    )
    _write_json(out / f"{prefix}_spectrum.json", meta)
    return meta


def run_evolve(cfg: RunConfig, out: Path) -> dict:
    spec = build_system(cfg.system)
    ev = cfg.evolve
    basis = build_manifolds(spec)
    n = basis.n_ground
    if isinstance(ev.initial_ground, int):
        if not 0 <= ev.initial_ground < n:
            raise SchemaError([("evolve.initial_ground", f"index outside the {n}-state ground manifold")])
        sigma0 = GroundDensity.pure(n, ev.initial_ground)
    else:
        sigma0 = GroundDensity(complex_matrix(ev.initial_ground))
    if ev.segments:
        segments = []
        for seg in ev.segments:
            heff, lops = effective_generators(spec, make_field(spec, ev.omega_gamma0, seg.drive), basis)
            segments.append((seg.duration_gamma0, heff, lops))
        traj = evolve_segments(sigma0, segments, ev.dt_gamma0, ev.method, ev.sample_every)
    else:
        heff, lops = effective_generators(spec, make_field(spec, ev.omega_gamma0, ev.drive), basis)
        traj = evolve(sigma0, heff, lops, (0.0, ev.t_stop_gamma0), ev.dt_gamma0, ev.method, ev.sample_every)
    header = ["t"]
    for a in range(n):
        for b in range(n):
            header += [f"rho_{a}_{b}_re", f"rho_{a}_{b}_im"]
    with open(out / f"{cfg.output.prefix}_evolve.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t, state in zip(traj.times, traj.states):
            row = [_num(t)]
            for v in state.reshape(-1):
                row += [_num(v.real), _num(v.imag)]
            writer.writerow(row)
    meta = _metadata(
        cfg,
        ground_states=[basis.ground_label(g) for g in range(n)],
        samples=len(traj.times),
        invariant_defects=traj.invariant_defects(),
    )
    _write_json(out / f"{cfg.output.prefix}_evolve.json", meta)
    return meta


def run_mint_golden(cfg: RunConfig, out: Path) -> dict:
    """Single-photon reference spectrum from the real-space oracle."""
    spec = build_system(cfg.system)
    grid = cfg.spectrum.grid()
    path = out / f"{cfg.output.prefix}_golden.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["omega", "r_re", "r_im", "t_re", "t_im"])
        for w in grid:
            r, t = single_excitation_scattering(spec, float(w))
            writer.writerow([_num(w), _num(r.real), _num(r.imag), _num(t.real), _num(t.imag)])
    meta = _metadata(cfg, grid={"start_gamma0": float(grid[0]), "stop_gamma0": float(grid[-1]), "points": len(grid)},
                     source="single-excitation real-space oracle")
    _write_json(out / f"{cfg.output.prefix}_golden.json", meta)
    return meta


def run(cfg: RunConfig, out_dir=None, threads=None) -> dict:
    out = Path(out_dir if out_dir is not None else cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.task == "spectrum":
        return run_spectrum(cfg, out, threads)
    if cfg.task == "evolve":
        return run_evolve(cfg, out)
    return run_mint_golden(cfg, out)


def _fail(code, kind, message, details=None):
    payload = {"error": kind, "message": message}
    if details:
        payload["details"] = details
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="multiscatter", description="Weak-field scattering and effective dynamics.")
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--task", choices=["spectrum", "evolve", "mint-golden"], help="override the configured task")
    parser.add_argument("--out", help="output directory (overrides output.directory)")
    parser.add_argument("--threads", type=int, default=None, help="sweep worker threads")
    parser.add_argument("--check", action="store_true", help="validate the configuration and exit")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = parse_config(text)
        if args.task and args.task != cfg.task:
            cfg = parse_config(json.dumps({**json.loads(text), "task": args.task}))
        if args.check:
            print(json.dumps({"status": "ok", "task": cfg.task, "spec_hash": spec_hash(cfg)}))
            return 0
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            meta = run(cfg, args.out, args.threads)
        for w in caught:
            print(json.dumps({"warning": type(w.message).__name__, "message": str(w.message)}), file=sys.stderr)
        print(json.dumps({"status": "ok", "task": cfg.task, "spec_hash": meta["spec_hash"]}))
        return 0
    except SchemaError as exc:
        return _fail(1, "SchemaError", str(exc), [{"path": p, "reason": r} for p, r in exc.errors])
    except (MultiscatterError, OSError) as exc:
        return _fail(1, type(exc).__name__, str(exc))
    except Exception as exc:  # noqa: BLE001 - last-resort reporting
        return _fail(2, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
