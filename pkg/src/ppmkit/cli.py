"""Command-line front end.

Every subcommand resolves its full configuration (defaults included), runs,
and emits a JSON report echoing that configuration -- identical invocations
produce byte-identical output; nothing time- or host-dependent goes into a
report.  ``bell scan`` is the one exception: it emits the contour CSV
directly.

Exit codes: 0 success / check passed, 1 check failed, 2 bad input or broken
invariants, so automation can tell a scientific failure from a plumbing one.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from . import bb84, entangle, info, measure, quantum
from .errors import DomainError, PpmkitError

_CHECK_TOLS = {
    "density": {"hermiticity": 1e-12, "negativity": 1e-10, "trace_error": 1e-12},
    "detection": {"hermiticity": 1e-12, "negativity": 1e-10, "excess": 1e-10},
    "povm": {
        "hermiticity": 1e-12,
        "negativity": 1e-10,
        "excess": 1e-10,
        "completeness": 1e-10,
    },
}


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".ppmkit-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, text: str) -> None:
    if getattr(args, "out", None):
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)


def _load_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _unwrap(payload: dict, key: str) -> dict:
    """Accept either a bare artifact or a report embedding one."""
    if "results" in payload and isinstance(payload["results"], dict):
        inner = payload["results"].get(key)
        if inner is not None:
            return inner
    return payload


def _config_echo(args, skip=("handler", "command_name")) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in skip}
    cfg.setdefault("seed", 0)
    return cfg


def _report(args, results: dict, residuals: dict | None = None,
            grid: dict | None = None) -> dict:
    return {
        "version": __version__,
        "command": args.command_name,
        "config": _config_echo(args),
        "results": results,
        "residuals": residuals or {},
        "grid": grid or {},
    }


def _require_positive(value: float, name: str) -> float:
    if not value > 0:
        raise DomainError(f"{name} must be positive, got {value}")
    return value


def _require_resolution(value: int, name: str = "resolution") -> int:
    if value < 2:
        raise DomainError(f"{name} must be at least 2, got {value}")
    return value


def _parse_point_text(domain: measure.ParamDomain, text: str) -> measure.ParamPoint:
    tokens = [t.strip() for t in text.split(",") if t.strip() != ""]
    values: list = []
    pos = 0
    for comp in domain.components:
        if isinstance(comp, measure.SpherePoint):
            if pos + 2 > len(tokens):
                raise DomainError(f"point {text!r} too short for the domain")
            values.append((float(tokens[pos]), float(tokens[pos + 1])))
            pos += 2
        elif isinstance(comp, measure.FiniteSet):
            if pos >= len(tokens):
                raise DomainError(f"point {text!r} too short for the domain")
            values.append(tokens[pos])
            pos += 1
        else:
            if pos >= len(tokens):
                raise DomainError(f"point {text!r} too short for the domain")
            values.append(float(tokens[pos]))
            pos += 1
    if pos != len(tokens):
        raise DomainError(f"point {text!r} has {len(tokens) - pos} extra values")
    return domain.point(values)


def _builtin_family(name: str):
    """(family, layout, side-grid builder) for the built-in bipartite PPMs."""
    if name == "torus":
        return (
            entangle.torus_ppm_family(),
            entangle.torus_layout(),
            lambda res: (entangle.circle_grid(res), entangle.circle_grid(res)),
        )
    if name == "sphere":
        def grids(res):
            g = entangle.sphere_orbit_grid(half=max(res * res // 2, 1))
            return g, g

        return entangle.sphere_ppm_family(), entangle.sphere_layout(), grids
    return None


def _load_ppm_with_layout(path: str):
    payload = _unwrap(_load_json(path), "ppm")
    ppm = measure.ppm_from_dict(payload)
    layout_spec = payload.get("layout")
    layout = None
    if layout_spec is not None:
        layout = measure.BipartiteLayout.build(
            ppm.domain,
            tuple(layout_spec["side_a"]),
            tuple(layout_spec["side_b"]),
            measure.OutcomeSpace(tuple(layout_spec["space_a"])),
            measure.OutcomeSpace(tuple(layout_spec["space_b"])),
        )
    return ppm, layout


def _resolve_check_target(args):
    builtin = _builtin_family(args.ppm)
    if builtin is not None:
        family, layout, grids = builtin
        grid_a, grid_b = grids(_require_resolution(args.res, "res"))
        return family, layout, grid_a, grid_b
    ppm, layout = _load_ppm_with_layout(args.ppm)
    if layout is None:
        raise DomainError(
            "a file-based family needs a 'layout' block for bipartite checks"
        )
    seen_a: list = []
    seen_b: list = []
    for p in ppm.grid.points:
        pa, pb = layout.split(p)
        if pa not in seen_a:
            seen_a.append(pa)
        if pb not in seen_b:
            seen_b.append(pb)
    grid_a = measure.ParamGrid(layout.domain_a, tuple(seen_a))
    grid_b = measure.ParamGrid(layout.domain_b, tuple(seen_b))
    return ppm, layout, grid_a, grid_b


def _finish_check(args, result: measure.CheckResult) -> int:
    if getattr(args, "csv", None):
        _atomic_write(args.csv, measure.check_csv_text(result))
    report = _report(
        args,
        result.summary(),
        residuals={"max_violation": result.max_violation},
        grid={"side_a": result.grid_a_size, "side_b": result.grid_b_size},
    )
    _emit(args, _dump(report))
    return 0 if result.passed else 1


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_model_validate(args) -> int:
    payload = _unwrap(_load_json(args.model), "model")
    kind = payload.get("kind")
    if kind is None:
        if "rhos" in payload:
            kind = "model"
        elif "elements" in payload:
            kind = "povm"
        else:
            raise DomainError(
                "cannot infer the payload kind; set 'kind' to density, "
                "detection, povm, or model"
            )

    residuals: dict[str, float]
    if kind == "density":
        residuals = quantum.density_residuals(quantum.matrix_from_dict(payload))
        tols = _CHECK_TOLS["density"]
    elif kind == "detection":
        residuals = quantum.detection_residuals(quantum.matrix_from_dict(payload))
        tols = _CHECK_TOLS["detection"]
    elif kind == "povm":
        residuals = quantum.povm_residuals(
            [quantum.matrix_from_dict(e) for e in payload["elements"]]
        )
        tols = _CHECK_TOLS["povm"]
    elif kind == "model":
        state_res = {"hermiticity": 0.0, "negativity": 0.0, "trace_error": 0.0}
        povm_res = {
            "hermiticity": 0.0, "negativity": 0.0, "excess": 0.0,
            "completeness": 0.0,
        }
        for r in payload["rhos"]:
            for key, val in quantum.density_residuals(
                quantum.matrix_from_dict(r)
            ).items():
                state_res[key] = max(state_res[key], val)
        for elems in payload["povms"]:
            for key, val in quantum.povm_residuals(
                [quantum.matrix_from_dict(e) for e in elems]
            ).items():
                povm_res[key] = max(povm_res[key], val)
        residuals = {f"state_{k}": v for k, v in state_res.items()}
        residuals.update({f"povm_{k}": v for k, v in povm_res.items()})
        tols = {f"state_{k}": v for k, v in _CHECK_TOLS["density"].items()}
        tols.update({f"povm_{k}": v for k, v in _CHECK_TOLS["povm"].items()})
    else:
        raise DomainError(f"unknown payload kind {kind!r}")

    verdicts = {k: residuals[k] <= tols[k] for k in residuals}
    ok = all(verdicts.values())
    report = _report(
        args,
        {"kind": kind, "ok": ok, "verdicts": verdicts, "tolerances": tols},
        residuals=residuals,
    )
    _emit(args, _dump(report))
    return 0 if ok else 2


def _cmd_ppm_generate(args) -> int:
    model, model_grid = quantum.model_from_dict(_unwrap(_load_json(args.model), "model"))
    grid = model_grid
    if args.grid:
        grid = measure.grid_from_dict(
            _unwrap(_load_json(args.grid), "grid"), model.domain
        )
    ppm = quantum.generate_ppm(model, grid, name="generated")
    report = _report(
        args,
        {"ppm": measure.ppm_to_dict(ppm)},
        grid={"points": grid.size},
    )
    _emit(args, _dump(report))
    return 0


def _cmd_ppm_distance(args) -> int:
    ppm_a, _layout = _load_ppm_with_layout(args.ppm_a)
    ppm_b, _layout = _load_ppm_with_layout(args.ppm_b)
    if args.grid:
        grid = measure.grid_from_dict(
            _unwrap(_load_json(args.grid), "grid"), ppm_a.domain
        )
    else:
        grid = ppm_a.grid
    distance = measure.ppm_distance(ppm_a, ppm_b, grid)
    report = _report(
        args,
        {"distance": distance, "grid_points": grid.size},
        residuals={"distance": distance},
        grid={"points": grid.size},
    )
    _emit(args, _dump(report))
    return 0


def _cmd_ppm_envelop(args) -> int:
    fine, _l = _load_ppm_with_layout(args.fine)
    coarse, _l = _load_ppm_with_layout(args.coarse)
    mapping = _unwrap(_load_json(args.map), "map")
    param_map = [int(i) for i in mapping["param_map"]]
    xi = measure.OutcomeSurjection(
        fine.space, coarse.space, tuple(int(i) for i in mapping["outcome_map"])
    )
    if len(param_map) != coarse.grid.size:
        raise DomainError("param_map needs one fine index per coarse grid point")
    worst = 0.0
    for i, _k in enumerate(coarse.grid.points):
        j = param_map[i]
        if not 0 <= j < fine.grid.size:
            raise DomainError(f"param_map[{i}] = {j} outside the fine grid")
        worst = max(
            worst,
            measure.refinement_deviation(
                fine.measures[j], xi, coarse.measures[i]
            ),
        )
    passed = worst <= args.tol
    report = _report(
        args,
        {"envelops": passed, "max_deviation": worst},
        residuals={"max_deviation": worst},
        grid={"coarse_points": coarse.grid.size, "fine_points": fine.grid.size},
    )
    _emit(args, _dump(report))
    return 0 if passed else 1


def _cmd_canonical_build(args) -> int:
    ppm, _layout = _load_ppm_with_layout(args.ppm)
    model = quantum.canonical_model(ppm)
    check = quantum.model_generates(model, ppm, ppm.grid)
    report = _report(
        args,
        {
            "model": quantum.model_to_dict(model, ppm.grid),
            "regenerates": check.passed,
        },
        residuals={"max_deviation": check.max_deviation},
        grid={"points": ppm.grid.size},
    )
    _emit(args, _dump(report))
    return 0 if check.passed else 1


def _cmd_split_build(args) -> int:
    ppm, _layout = _load_ppm_with_layout(args.ppm)
    prep_idx = tuple(int(t) for t in args.prep_components.split(",") if t.strip())
    meas_idx = tuple(i for i in range(ppm.domain.size) if i not in prep_idx)
    if sorted(prep_idx) != list(prep_idx) or any(
        not 0 <= i < ppm.domain.size for i in prep_idx
    ):
        raise DomainError("prep components must be sorted valid indices")
    order = prep_idx + meas_idx
    if order != tuple(range(ppm.domain.size)):
        # permute the family so preparation components come first
        domain = measure.ParamDomain(
            tuple(ppm.domain.components[i] for i in order)
        )
        grid = measure.ParamGrid(
            domain,
            tuple(
                measure.ParamPoint(tuple(p.values[i] for i in order))
                for p in ppm.grid.points
            ),
        )
        ppm = measure.Ppm.from_table(grid, ppm.space, ppm.measures, ppm.name)
        prep_idx = tuple(range(len(prep_idx)))
    prep_vals: list = []
    meas_vals: list = []
    n_prep = len(prep_idx)
    for p in ppm.grid.points:
        head = measure.ParamPoint(p.values[:n_prep])
        tail = measure.ParamPoint(p.values[n_prep:])
        if head not in prep_vals:
            prep_vals.append(head)
        if tail not in meas_vals:
            meas_vals.append(tail)
    prep_grid = measure.ParamGrid(
        measure.ParamDomain(ppm.domain.components[:n_prep]), tuple(prep_vals)
    )
    meas_grid = measure.ParamGrid(
        measure.ParamDomain(ppm.domain.components[n_prep:]), tuple(meas_vals)
    )
    model = quantum.split_canonical_model(ppm, prep_grid, meas_grid)
    check = quantum.model_generates(model, ppm, ppm.grid)
    report = _report(
        args,
        {
            "model": quantum.model_to_dict(model, ppm.grid),
            "regenerates": check.passed,
            "prep_points": prep_grid.size,
            "meas_points": meas_grid.size,
        },
        residuals={"max_deviation": check.max_deviation},
        grid={"points": ppm.grid.size},
    )
    _emit(args, _dump(report))
    return 0 if check.passed else 1


def _cmd_holevo(args) -> int:
    channel = info.channel_from_dict(_unwrap(_load_json(args.channel), "channel"))
    bound = info.tightened_bound(channel)
    report = _report(
        args,
        bound.to_dict(),
        residuals={
            "holevo_slack": bound.chi - bound.mutual_information,
            "tightened_slack": bound.tightened_chi - bound.mutual_information,
        },
    )
    _emit(args, _dump(report))
    return 0


def _cmd_bb84_attack(args) -> int:
    if args.bank:
        bank = bb84.bank_from_dict(
            _unwrap(_load_json(args.bank), "bank"), points=args.grid_points
        )
    else:
        _require_positive(args.wavelength_m, "wavelength")
        _require_positive(args.pulse_s, "pulse duration")
        bank = bb84.detuned_bank(
            args.wavelength_m, args.pulse_s, args.detune_frac,
            points=args.grid_points,
        )
    result = bb84.mismatch_attack(bank, threshold=args.threshold)
    spectral = np.asarray(result.spectral_gram)
    report = _report(
        args,
        result.to_dict(),
        residuals={
            "max_offdiagonal_spectral_overlap": float(
                spectral[~np.eye(4, dtype=bool)].max()
            )
        },
        grid={"frequency_points": bank.grid.size},
    )
    _emit(args, _dump(report))
    return 0


def _cmd_bb84_envelop(args) -> int:
    _require_resolution(args.angles, "angles")
    _require_positive(args.tol, "tol")
    omega0 = 2.0 * math.pi * bb84.SPEED_OF_LIGHT / args.wavelength_m
    grid = bb84.frequency_grid_around(omega0, args.pulse_s, args.grid_points)
    basis = bb84.hermite_gaussian_basis(omega0, args.pulse_s, grid, args.basis_size)
    witness = bb84.envelopment_witness(
        basis, entangle.circle_grid(args.angles), tol=args.tol
    )
    report = _report(
        args,
        {"envelops": witness.passed, "max_deviation": witness.max_deviation},
        residuals={"max_deviation": witness.max_deviation},
        grid={"angles": args.angles, "frequency_points": grid.size},
    )
    _emit(args, _dump(report))
    return 0 if witness.passed else 1


def _cmd_bell_scan(args) -> int:
    table = entangle.contour_export(_require_resolution(args.resolution))
    _emit(args, table.text())
    return 0


def _cmd_bell_max(args) -> int:
    setting, value = entangle.s_bell_maximize(
        _require_resolution(args.resolution)
    )
    report = _report(
        args,
        {
            "setting": {
                "theta_a": setting.theta_a,
                "theta_a_prime": setting.theta_a_prime,
                "theta_b": setting.theta_b,
                "theta_b_prime": setting.theta_b_prime,
            },
            "value": value,
        },
        residuals={"gap_to_2sqrt2": 2.0 * math.sqrt(2.0) - value},
    )
    _emit(args, _dump(report))
    return 0


def _cmd_bell_orbit(args) -> int:
    pair_a = [float(t) for t in args.pair_a.split(",")]
    pair_b = [float(t) for t in args.pair_b.split(",")]
    if len(pair_a) != 4 or len(pair_b) != 4:
        raise DomainError("each pair needs theta_a,phi_a,theta_b,phi_b")
    result = entangle.orbit_rotation(
        entangle.SpherePairPoint(*pair_a),
        entangle.SpherePairPoint(*pair_b),
        tol=args.tol,
    )
    report = _report(
        args, result.to_dict(), residuals={"alignment_residual": result.residual}
    )
    _emit(args, _dump(report))
    return 0


def _cmd_check_nosignal(args) -> int:
    family, layout, grid_a, grid_b = _resolve_check_target(args)
    return _finish_check(
        args, measure.no_signaling_check(family, layout, grid_a, grid_b, args.tol)
    )


def _cmd_check_reach(args) -> int:
    family, layout, grid_a, grid_b = _resolve_check_target(args)
    return _finish_check(
        args, measure.local_reach_check(family, layout, grid_a, grid_b, args.tol)
    )


def _cmd_check_marginals(args) -> int:
    family, layout, grid_a, grid_b = _resolve_check_target(args)
    return _finish_check(
        args,
        measure.marginal_invariance_check(family, layout, grid_a, grid_b, args.tol),
    )


def _cmd_levelset_probe(args) -> int:
    builtin = _builtin_family(args.ppm)
    if builtin is not None:
        family = builtin[0]
    else:
        family, _layout = _load_ppm_with_layout(args.ppm)
    point = _parse_point_text(family.domain, args.point)
    point2 = _parse_point_text(family.domain, args.point_2)
    distance = measure.l1_distance(family.at(point), family.at(point2))
    equal = distance <= args.tol
    report = _report(
        args,
        {"same_level_set": equal, "l1_distance": distance},
        residuals={"l1_distance": distance},
    )
    _emit(args, _dump(report))
    return 0 if equal else 1


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(sp, out=True, seed=True):
    if out:
        sp.add_argument("--out", help="write the report here (default: stdout)")
    if seed:
        sp.add_argument("--seed", type=int, default=0,
                        help="seed echoed into the report (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppmkit",
        description=(
            "parametrized probability measures, their quantum models, and "
            "their diagnostics"
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    top = parser.add_subparsers(dest="group", required=True)

    model = top.add_parser("model", help="operator / model validation").add_subparsers(
        dest="action", required=True
    )
    sp = model.add_parser("validate", help="report every invariant's residual")
    sp.add_argument("--model", required=True, help="operator, POVM, or model JSON")
    _add_common(sp)
    sp.set_defaults(handler=_cmd_model_validate, command_name="model validate")

    ppm = top.add_parser("ppm", help="family generation and relations").add_subparsers(
        dest="action", required=True
    )
    sp = ppm.add_parser("generate", help="tabulate a model's family (trace rule)")
    sp.add_argument("--model", required=True)
    sp.add_argument("--grid", help="grid JSON (default: the model's own grid)")
    _add_common(sp)
    sp.set_defaults(handler=_cmd_ppm_generate, command_name="ppm generate")

    sp = ppm.add_parser("distance", help="sup of L1 distances over a grid")
    sp.add_argument("--ppm-a", required=True)
    sp.add_argument("--ppm-b", required=True)
    sp.add_argument("--grid", help="grid JSON (default: ppm-a's grid)")
    _add_common(sp)
    sp.set_defaults(handler=_cmd_ppm_distance, command_name="ppm distance")

    sp = ppm.add_parser("envelop", help="check envelopment via explicit maps")
    sp.add_argument("--fine", required=True, help="tabulated fine family")
    sp.add_argument("--coarse", required=True, help="tabulated coarse family")
    sp.add_argument(
        "--map", required=True,
        help="JSON with param_map (fine index per coarse point) and outcome_map",
    )
    sp.add_argument("--tol", type=float, default=1e-9)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_ppm_envelop, command_name="ppm envelop")

    canonical = top.add_parser("canonical", help="diagonal model builders")
    canonical_sub = canonical.add_subparsers(dest="action", required=True)
    sp = canonical_sub.add_parser("build", help="diagonal model of a tabulated family")
    sp.add_argument("--ppm", required=True)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_canonical_build, command_name="canonical build")

    split = top.add_parser("split", help="preparation/measurement split builders")
    split_sub = split.add_subparsers(dest="action", required=True)
    sp = split_sub.add_parser(
        "build", help="split diagonal model of a family on a product grid"
    )
    sp.add_argument("--ppm", required=True)
    sp.add_argument(
        "--prep-components", required=True,
        help="comma-separated component indices forming the preparation sublist",
    )
    _add_common(sp)
    sp.set_defaults(handler=_cmd_split_build, command_name="split build")

    sp = top.add_parser("holevo", help="mutual information and bound chain")
    sp.add_argument("--channel", required=True, help="channel JSON")
    _add_common(sp)
    sp.set_defaults(handler=_cmd_holevo, command_name="holevo")

    bb = top.add_parser("bb84", help="two-level key-distribution study")
    bb_sub = bb.add_subparsers(dest="action", required=True)
    sp = bb_sub.add_parser("attack", help="four-laser spectral mismatch report")
    sp.add_argument("--wavelength-m", type=float, default=1.5e-6)
    sp.add_argument("--pulse-s", type=float, default=1e-9)
    sp.add_argument("--detune-frac", type=float, default=1e-5)
    sp.add_argument("--grid-points", type=int, default=2048)
    sp.add_argument("--threshold", type=float, default=1e-3)
    sp.add_argument("--bank", help="laser bank JSON (overrides the flags above)")
    _add_common(sp)
    sp.set_defaults(handler=_cmd_bb84_attack, command_name="bb84 attack")

    sp = bb_sub.add_parser(
        "envelop", help="fine family restricted to mode 1 vs the coarse family"
    )
    sp.add_argument("--angles", type=int, default=16)
    sp.add_argument("--basis-size", type=int, default=4)
    sp.add_argument("--wavelength-m", type=float, default=1.5e-6)
    sp.add_argument("--pulse-s", type=float, default=1e-9)
    sp.add_argument("--grid-points", type=int, default=2048)
    sp.add_argument("--tol", type=float, default=1e-10)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_bb84_envelop, command_name="bb84 envelop")

    bell = top.add_parser("bell", help="torus/sphere Bell-violation families")
    bell_sub = bell.add_subparsers(dest="action", required=True)
    sp = bell_sub.add_parser("scan", help="contour CSV over the torus")
    sp.add_argument("--resolution", type=int, default=64)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_bell_scan, command_name="bell scan")

    sp = bell_sub.add_parser("max", help="maximize the CHSH combination")
    sp.add_argument("--resolution", type=int, default=16)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_bell_max, command_name="bell max")

    sp = bell_sub.add_parser(
        "orbit", help="rotation between two equal-separation sphere pairs"
    )
    sp.add_argument("--pair-a", required=True, help="theta_a,phi_a,theta_b,phi_b")
    sp.add_argument("--pair-b", required=True, help="theta_a,phi_a,theta_b,phi_b")
    sp.add_argument("--tol", type=float, default=1e-9)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_bell_orbit, command_name="bell orbit")

    check = top.add_parser("check", help="bipartite grid diagnostics")
    check_sub = check.add_subparsers(dest="action", required=True)
    for action, handler, desc in (
        ("nosignal", _cmd_check_nosignal, "marginals ignore the far side"),
        ("reach", _cmd_check_reach, "either side can compensate the other"),
        ("marginals", _cmd_check_marginals, "marginals constant over the grid"),
    ):
        sp = check_sub.add_parser(action, help=desc)
        sp.add_argument(
            "--ppm", required=True,
            help="'torus', 'sphere', or a tabulated family JSON with a layout",
        )
        sp.add_argument("--res", type=int, default=16,
                        help="per-side resolution for the built-in families")
        sp.add_argument("--tol", type=float, default=1e-9)
        sp.add_argument("--csv", help="also write per-point violations here")
        _add_common(sp)
        sp.set_defaults(handler=handler, command_name=f"check {action}")

    levelset = top.add_parser("levelset", help="level-set membership probes")
    levelset_sub = levelset.add_subparsers(dest="action", required=True)
    sp = levelset_sub.add_parser("probe", help="are two points on one level set?")
    sp.add_argument("--ppm", required=True)
    sp.add_argument("--point", required=True)
    sp.add_argument("--point-2", required=True)
    sp.add_argument("--tol", type=float, default=1e-9)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_levelset_probe, command_name="levelset probe")

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "tol", None) is not None:
            _require_positive(args.tol, "tol")
        return args.handler(args)
    except json.JSONDecodeError as exc:
        sys.stderr.write(
            _dump(
                {
                    "error": "malformed JSON",
                    "detail": exc.msg,
                    "line": exc.lineno,
                    "column": exc.colno,
                }
            )
        )
        return 2
    except (PpmkitError, OSError, KeyError) as exc:
        sys.stderr.write(
            _dump({"error": type(exc).__name__, "detail": str(exc)})
        )
        return 2


def main() -> None:
    sys.exit(run())
