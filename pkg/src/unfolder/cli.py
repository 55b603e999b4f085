"""Command-line entry point.

Exit codes: 0 success, 1 expected negative result (infeasible, invalid,
not flattenable), 2 bad input, 3 internal check failure. Diagnostics go to
stderr as one JSON object per line.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from . import __version__
from .errors import GeometryError, InvalidFrame, LoopsTouch, SelfIntersecting, UnfolderError

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3


class InputError(Exception):
    pass


class CheckFailed(Exception):
    pass


def _diag(level, code, message, **extra):
    rec = {"level": level, "code": code, "message": message}
    rec.update({k: v for k, v in extra.items() if v is not None})
    sys.stderr.write(json.dumps(rec, sort_keys=True, default=str) + "\n")


def _emit(obj):
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")


def _load(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}")
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON ({e})")


def _polygon(d):
    from .geom import validate_polygon
    if isinstance(d, dict) and "domain" in d and "vertices" not in d:
        d = d["domain"]
    verts = d["vertices"] if isinstance(d, dict) else d
    return validate_polygon([tuple(map(float, v)) for v in verts])


def _spiral_params(d):
    from .spiral import SpiralParams
    return SpiralParams(tuple(map(float, d["center"])), float(d["theta"]), float(d.get("rate", 1.0)),
                        float(d.get("margin", 0.0)), bool(d.get("marginal", False)))


def _params_or_search(args, P):
    from .spiral import find_spiral_params
    if args.params:
        return _spiral_params(_load(args.params))
    return find_spiral_params(P, args.samples)


def _default_seed():
    s = os.environ.get("UNFOLDER_SEED", "0")
    try:
        return int(s)
    except ValueError:
        raise InputError(f"UNFOLDER_SEED must be an integer, got {s!r}")


def _positive(kind):
    def conv(s):
        v = kind(s)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive: {s}")
        return v
    return conv


# --------------------------------------------------------------------------
# subcommands


def cmd_kernel(args):
    from .spiral import star_kernel
    K = star_kernel(_polygon(_load(args.polygon)))
    _emit(K.to_json())
    return EXIT_NEGATIVE if K.is_empty else EXIT_OK


def cmd_spiral(args):
    from .spiral import find_spiral_params, margin_curve, spiral_feasible_region
    P = _polygon(_load(args.polygon))
    sp = find_spiral_params(P, args.samples, args.refine)
    if args.csv:
        curve = margin_curve(P, args.samples)
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "margin", "feasible"])
            for th, m in curve:
                w.writerow([repr(th), repr(m), int(not spiral_feasible_region(P, th).is_empty)])
    if sp is None:
        sys.stdout.write("none\n")
        return EXIT_NEGATIVE
    _emit(sp.to_json())
    return EXIT_OK


def cmd_verify_shrink(args):
    from .spiral import verify_shrinking_motion
    P = _polygon(_load(args.polygon))
    sp = _spiral_params(_load(args.params))
    rep = verify_shrinking_motion(P, sp, args.steps, args.horizon)
    _emit(rep.to_json())
    return EXIT_OK if rep.verdict else EXIT_NEGATIVE


def cmd_fold1d_validate(args):
    from .fold1d import Folding1D, validate_folding1d
    v = validate_folding1d(Folding1D.from_json(_load(args.folding)))
    _emit(v.to_json())
    return EXIT_OK if v.ok else EXIT_NEGATIVE


def cmd_fold1d_unfold(args):
    from .fold1d import Folding1D, unfold_motion_1d, validate_folding1d
    f = Folding1D.from_json(_load(args.folding))
    v = validate_folding1d(f)
    if not v.ok:
        _diag("error", v.code, "input folding is invalid: " + v.message, witness=v.witness)
        return EXIT_NEGATIVE
    m = unfold_motion_1d(f, args.base, args.steps)
    for k, fr in enumerate(m.frames):
        vk = validate_folding1d(fr)
        if not vk.ok:
            raise CheckFailed(f"frame {k} fails validation: {vk.code}")
    _emit(m.to_json())
    return EXIT_OK


def cmd_flatfold_validate(args):
    from .flatfold import FlatFold2D, validate_flatfold
    F = FlatFold2D.from_json(_load(args.flatfold))
    v = validate_flatfold(F, args.transversals, args.seed)
    _emit(v.to_json())
    return EXIT_OK if v.ok else EXIT_NEGATIVE


def cmd_flatfold_unfold(args):
    from .flatfold import FlatFold2D, unfold_motion_flatfold, validate_flatfold
    F = FlatFold2D.from_json(_load(args.flatfold))
    v = validate_flatfold(F, args.transversals, args.seed)
    if not v.ok:
        _diag("error", v.code, "input folding is invalid: " + v.message, witness=v.witness)
        return EXIT_NEGATIVE
    sp = _params_or_search(args, F.domain)
    if sp is None:
        _diag("error", "NotSpiralShaped", "no spiral shrinking motion found for the domain")
        return EXIT_NEGATIVE
    try:
        m = unfold_motion_flatfold(F, sp, args.steps, args.transversals, args.seed)
    except InvalidFrame as e:
        raise CheckFailed(f"{e} (frame {e.frame})")
    out = m.to_json()
    out["spiral"] = sp.to_json()
    _emit(out)
    return EXIT_OK


def _embed_input(path):
    from .embed3d import Embed3D
    return Embed3D.from_json(_load(path))


def cmd_embed_build(args):
    E = _embed_input(args.embedding)
    out = E.to_json()
    out["faces"] = [{"vertices": [list(v) for v in E.faces[f]],
                     "isometry": E.face_map(f).to_json(),
                     "image": E.face_vertices3(f).tolist()} for f in range(len(E.faces))]
    _emit(out)
    return EXIT_OK


def cmd_embed_check(args):
    from .embed3d import check_self_intersection
    rep = check_self_intersection(_embed_input(args.embedding), args.subdivisions)
    _emit(rep.to_json())
    return EXIT_OK if rep.ok else EXIT_NEGATIVE


def cmd_embed_unfold(args):
    from .embed3d import check_self_intersection, export_motion_obj, unfold_motion_embed
    E = _embed_input(args.embedding)
    rep = check_self_intersection(E, args.subdivisions)
    if not rep.ok:
        _diag("error", "SelfIntersecting", "input embedding self-intersects", witness=rep.witness)
        return EXIT_NEGATIVE
    sp = _params_or_search(args, E.domain)
    if sp is None:
        _diag("error", "NotSpiralShaped", "no spiral shrinking motion found for the domain")
        return EXIT_NEGATIVE
    try:
        m = unfold_motion_embed(E, sp, args.steps, args.subdivisions)
    except InvalidFrame as e:
        raise CheckFailed(f"{e} (frame {e.frame})")
    if args.out:
        manifest = export_motion_obj(m, args.out, args.subdivisions)
    else:
        manifest = {"format": 1, "status": m.status, "case": m.case,
                    "link": m.link.to_json() if m.link else None, "diagnostics": m.diagnostics}
    manifest["spiral"] = sp.to_json()
    _emit(manifest)
    if m.status != "flat":
        _diag("warning", m.status, "center is a boundary point on several folds; the motion stops at its link")
        return EXIT_NEGATIVE
    return EXIT_OK


def _loops_from(paths):
    from .topolink import PolyLoop
    loops = []
    for p in paths:
        d = _load(p)
        if isinstance(d, dict) and "loops" in d:
            loops += [PolyLoop.from_json(x) for x in d["loops"]]
        else:
            loops.append(PolyLoop.from_json(d))
    if len(loops) != 2:
        raise InputError(f"need exactly two loops, got {len(loops)}")
    return loops


def cmd_linking(args):
    from .topolink import linking_number
    a, b = _loops_from(args.loops)
    try:
        lk = linking_number(a, b, args.seed)
    except LoopsTouch as e:
        _diag("error", "LoopsTouch", str(e), witness=e.witness)
        return EXIT_NEGATIVE
    _emit({"format": 1, "linkingNumber": lk})
    return EXIT_OK


def cmd_locked_example(args):
    from .topolink import build_locked_example, measure_properties
    try:
        cfg = build_locked_example(args.turns, args.chords, args.loop, args.tilt)
    except SelfIntersecting as e:
        _diag("error", "SelfIntersecting", str(e), witness=e.witness)
        return EXIT_NEGATIVE
    if args.out:
        cfg.export(args.out)
        with open(os.path.join(args.out, "surface.json"), "w") as fh:
            json.dump(cfg.surface.to_json(), fh, indent=1, sort_keys=True)
    out = measure_properties(cfg, args.seed).to_json()
    out["params"] = cfg.params
    _emit(out)
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="unfolder", description="Star/spiral recognition and unfolding of folded sheets.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    pos_int, pos_float = _positive(int), _positive(float)

    s = sub.add_parser("kernel", help="kernel of a simple polygon")
    s.add_argument("polygon")
    s.set_defaults(func=cmd_kernel)

    s = sub.add_parser("spiral", help="find spiral shrinking parameters")
    s.add_argument("polygon")
    s.add_argument("--samples", type=pos_int, default=720)
    s.add_argument("--refine", type=pos_int, default=60)
    s.add_argument("--csv", help="write the theta margin curve here")
    s.set_defaults(func=cmd_spiral)

    s = sub.add_parser("verify-shrink", help="check sampled spiral copies stay inside")
    s.add_argument("polygon")
    s.add_argument("params")
    s.add_argument("--steps", type=pos_int, default=64)
    s.add_argument("--horizon", type=pos_float)
    s.set_defaults(func=cmd_verify_shrink)

    s = sub.add_parser("fold1d-validate")
    s.add_argument("folding")
    s.set_defaults(func=cmd_fold1d_validate)

    s = sub.add_parser("fold1d-unfold")
    s.add_argument("folding")
    s.add_argument("--steps", type=pos_int, default=256)
    s.add_argument("--base", type=float)
    s.set_defaults(func=cmd_fold1d_unfold)

    for name, func in (("flatfold-validate", cmd_flatfold_validate), ("flatfold-unfold", cmd_flatfold_unfold)):
        s = sub.add_parser(name)
        s.add_argument("flatfold")
        if name == "flatfold-unfold":
            s.add_argument("params", nargs="?", help="spiral parameters; searched for if omitted")
            s.add_argument("--steps", type=pos_int, default=64)
            s.add_argument("--samples", type=pos_int, default=720)
        s.add_argument("--seed", type=int)
        s.add_argument("--transversals", type=pos_int, default=2)
        s.set_defaults(func=func)

    s = sub.add_parser("embed-build")
    s.add_argument("embedding")
    s.set_defaults(func=cmd_embed_build)

    s = sub.add_parser("embed-check")
    s.add_argument("embedding")
    s.add_argument("--subdivisions", type=int, default=0)
    s.set_defaults(func=cmd_embed_check)

    s = sub.add_parser("embed-unfold")
    s.add_argument("embedding")
    s.add_argument("params", nargs="?", help="spiral parameters; searched for if omitted")
    s.add_argument("--steps", type=pos_int, default=64)
    s.add_argument("--samples", type=pos_int, default=720)
    s.add_argument("--subdivisions", type=int, default=0)
    s.add_argument("--out", help="directory for OBJ frames and manifest.json")
    s.set_defaults(func=cmd_embed_unfold)

    s = sub.add_parser("linking", help="linking number of two loops")
    s.add_argument("loops", nargs="+", help="two loop files, or one file with a 'loops' list")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_linking)

    s = sub.add_parser("locked-example", help="rolled square with two loops")
    s.add_argument("--turns", type=int, default=2)
    s.add_argument("--chords", type=int, default=16)
    s.add_argument("--loop", type=float, default=0.05)
    s.add_argument("--tilt", type=float, default=0.0)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_locked_example)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INPUT
    try:
        if getattr(args, "seed", "absent") is None:
            args.seed = _default_seed()
        return args.func(args)
    except (InputError, KeyError, TypeError, ValueError, GeometryError) as e:
        # ValueError also covers argument guards in the library
        code = type(e).__name__ if not isinstance(e, InputError) else "InputError"
        _diag("error", code, str(e), witness=getattr(e, "witness", None))
        return EXIT_INPUT
    except CheckFailed as e:
        _diag("error", "CheckFailed", str(e))
        return EXIT_INTERNAL
    except UnfolderError as e:
        _diag("error", type(e).__name__, str(e), witness=e.witness)
        return EXIT_NEGATIVE
    except Exception as e:   # noqa: BLE001
        _diag("error", "InternalError", f"{type(e).__name__}: {e}")
        return EXIT_INTERNAL


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
