"""``ssgt`` command line: encode, decode, eval, sweep, info.

Exit codes: 0 ok, 1 usage, 2 I/O, 3 format, 4 codec.
"""
from __future__ import annotations

import argparse
import os
import sys
import tempfile
from dataclasses import fields

from .bitstream import BitstreamError, Header, attribute_bits, decode_cloud, encode_cloud, parse
from .codec import RAHT, SSGT, CodecError, CodecParams
from .evaluation import DEFAULT_Q_LIST, bpp, evaluate, format_report, parse_synth_spec, rd_sweep, synth_cloud
from .graph import EigenConvergenceError
from .octree import GeometryError
from .pcio import PlyError, read_ply, voxelize, write_ply, ycbcr_to_rgb

EXIT_USAGE, EXIT_IO, EXIT_FORMAT, EXIT_CODEC = 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_q(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    if len(parts) not in (1, 3):
        raise UsageError(f"--q takes one value or Qy:Qcb:Qcr, got {text!r}")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"bad --q value {text!r}") from None
    return tuple(vals * 3) if len(vals) == 1 else tuple(vals)


def _parse_q_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad --q-list {text!r}") from None


def _params(args, transform=None) -> CodecParams:
    try:
        return CodecParams(
            transform=transform or args.transform, depth=args.depth, step=args.step,
            alpha=args.alpha, q=_parse_q(args.q),
        )
    except CodecError as exc:
        raise UsageError(str(exc)) from None


def _load_cloud(path: str, depth: int):
    if path.startswith("synth:"):
        try:
            seed, n = parse_synth_spec(path)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        return synth_cloud(seed, n, depth)
    with open(path, "rb") as fh:
        data = fh.read()
    return voxelize(read_ply(data), depth)


def _write_atomic(path: str, data: bytes):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".ssgt-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read(path: str) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) in (None, ""):
            raise UsageError(f"--{name.replace('_', '-')} is required for {args.command}")


def cmd_encode(args) -> int:
    _require(args, "input", "output")
    params = _params(args)
    cloud = _load_cloud(args.input, params.depth)
    data = encode_cloud(cloud, params, workers=args.workers)
    hdr, geometry, _ = parse(data)
    _write_atomic(args.output, data)
    print(f"n_points={cloud.n_points}")
    print(f"bpp={bpp(attribute_bits(hdr), cloud.n_points):.6f}")
    print(f"geometry_bytes={len(geometry)}")
    print(f"payload_bits={':'.join(str(b) for b in hdr.payload_bits)}")
    print(f"file_bytes={len(data)}")
    return 0


def cmd_decode(args) -> int:
    _require(args, "input", "output")
    cloud, _ = decode_cloud(_read(args.input), workers=args.workers)
    ply = write_ply(cloud.voxel_centers(), ycbcr_to_rgb(cloud.attributes))
    _write_atomic(args.output, ply)
    print(f"n_points={cloud.n_points}")
    return 0


def _emit_report(args, text: str):
    if args.report:
        _write_atomic(args.report, text.encode("ascii"))
    else:
        sys.stdout.write(text)


def cmd_eval(args) -> int:
    _require(args, "input")
    params = _params(args)
    cloud = _load_cloud(args.input, params.depth)
    row = evaluate(cloud, params, name=_input_name(args.input), workers=args.workers)
    _emit_report(args, format_report([row]))
    return 0


def cmd_sweep(args) -> int:
    _require(args, "input")
    q_list = _parse_q_list(args.q_list) if args.q_list else list(DEFAULT_Q_LIST)
    if not q_list:
        raise UsageError("--q-list is empty")
    transforms = (args.transform,) if args.transform_given else (SSGT, RAHT)
    template = _params(args, transform=SSGT if SSGT in transforms else RAHT)
    cloud = _load_cloud(args.input, template.depth)
    rows = rd_sweep(cloud, template, q_list, transforms=transforms,
                    name=_input_name(args.input), workers=args.workers)
    _emit_report(args, format_report(rows))
    return 0


def cmd_info(args) -> int:
    _require(args, "input")
    hdr = Header.unpack(_read(args.input))
    for f in fields(hdr):
        val = getattr(hdr, f.name)
        if isinstance(val, tuple):
            val = ":".join(repr(v) for v in val)
        print(f"{f.name}={val}")
    return 0


def _input_name(path: str) -> str:
    if path.startswith("synth:"):
        return path.replace(",", ";")
    return os.path.splitext(os.path.basename(path))[0]


COMMANDS = {
    "encode": cmd_encode,
    "decode": cmd_decode,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "info": cmd_info,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ssgt", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--input", help="PLY file, compressed file, or synth:seed=S,n=N")
    p.add_argument("--output")
    p.add_argument("--transform", choices=[SSGT, RAHT], default=None)
    p.add_argument("--depth", type=int, default=10)
    p.add_argument("--step", type=int, default=2)
    p.add_argument("--alpha", type=float, default=CodecParams.alpha)
    p.add_argument("--q", default="20", help="one step or Qy:Qcb:Qcr")
    p.add_argument("--q-list", default=None, help="comma-separated steps for sweep")
    p.add_argument("--report", default=None, help="CSV report path (default stdout)")
    p.add_argument("--workers", type=int, default=1)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.transform_given = args.transform is not None
    if args.transform is None:
        args.transform = SSGT
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"ssgt: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"ssgt: {exc}", file=sys.stderr)
        return EXIT_IO
    except (BitstreamError, GeometryError, PlyError) as exc:
        print(f"ssgt: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (CodecError, EigenConvergenceError) as exc:
        print(f"ssgt: codec error: {exc}", file=sys.stderr)
        return EXIT_CODEC


if __name__ == "__main__":
    sys.exit(main())
