"""Command-line driver: synthesize, perturb, restrict, complete and image.

Configuration is a flat ``key=value`` file with dotted keys, for example::

    mode=obstacle
    k=10
    scene.0.kind=kite
    scene.0.center=0,0
    ring.radius=5
    ring.count=128
    noise.delta=0.1
    noise.seed=7
    aperture.alpha=1.5707963267948966
    aperture.center=1.5707963267948966

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O or file-format error.
"""

import argparse
import hashlib
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import completion, geometry, imaging, nearfield
from .exceptions import FormatError
from .nearfield import Mode

log = logging.getLogger("nfsampling")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class StageError(RuntimeError):
    """Wraps a failure with the name of the pipeline stage it came from."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


MODE_DEFAULTS = {
    Mode.OBSTACLE: {"k": 10.0, "ring.radius": 5.0, "ring.count": 128, "n_bie": 256},
    Mode.CAVITY: {"k": 0.2, "ring.radius": 1.0, "ring.count": 32, "n_bie": 128},
}


def parse_config_text(text):
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for num, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {num}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {num}: empty key")
        if key in out:
            raise ConfigError(f"line {num}: duplicate key {key!r}")
        out[key] = value
    return out


@dataclass
class PipelineConfig:
    mode: Mode
    scene: list
    k: float
    ring_radius: float
    ring_count: int
    n_bie: int
    noise_delta: float = 0.0
    noise_seed: int = 0
    truncation: int = None
    normalization: str = "delta"
    grid: imaging.GridSpec = None
    aperture_alpha: float = None
    aperture_center: float = np.pi / 2
    aperture_J: int = 50
    aperture_eps: float = 1e-3
    save_nfm: bool = True
    scene_spec: list = field(default_factory=list)

    def resolved(self):
        """Flat dictionary of every resolved parameter, for the manifest."""
        out = {
            "mode": self.mode.value, "k": self.k, "ring.radius": self.ring_radius,
            "ring.count": self.ring_count, "n_bie": self.n_bie,
            "noise.delta": self.noise_delta, "noise.seed": self.noise_seed,
            "probe.truncation": self.truncation, "probe.normalization": self.normalization,
            "output.save_nfm": str(self.save_nfm).lower(),
        }
        for name in ("x0", "x1", "y0", "y1", "nx", "ny"):
            out[f"grid.{name}"] = getattr(self.grid, name)
        for i, (kind, center, radius) in enumerate(self.scene_spec):
            out[f"scene.{i}.kind"] = kind
            out[f"scene.{i}.center"] = f"{center[0]!r},{center[1]!r}"
            if radius is not None:
                out[f"scene.{i}.radius"] = radius
        if self.aperture_alpha is not None:
            out.update({
                "aperture.alpha": self.aperture_alpha, "aperture.center": self.aperture_center,
                "aperture.J": self.aperture_J, "aperture.eps": self.aperture_eps,
            })
        return out


def _get(raw, key, cast, default=None, positive=False, nonneg=False):
    if key not in raw:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        value = cast(raw[key])
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw[key]!r}") from None
    if isinstance(value, float) and not np.isfinite(value):
        raise ConfigError(f"{key} must be finite")
    if positive and not value > 0:
        raise ConfigError(f"{key} must be positive")
    if nonneg and value < 0:
        raise ConfigError(f"{key} must be nonnegative")
    return value


def _bool(text):
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def _point(text):
    parts = [float(p) for p in text.replace(" ", "").split(",")]
    if len(parts) != 2:
        raise ValueError(text)
    return tuple(parts)


KNOWN_PREFIXES = ("scene.", "grid.", "ring.", "noise.", "probe.", "aperture.", "output.")
KNOWN_KEYS = {"mode", "k", "n_bie"}


def build_config(raw, seed=None):
    """Resolve a parsed key/value mapping into a :class:`PipelineConfig`."""
    unknown = [k for k in raw if k not in KNOWN_KEYS and not k.startswith(KNOWN_PREFIXES)]
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
    try:
        mode = Mode(raw.get("mode", "obstacle"))
    except ValueError:
        raise ConfigError("mode must be 'obstacle' or 'cavity'") from None
    d = MODE_DEFAULTS[mode]

    indices = sorted({int(k.split(".")[1]) for k in raw if k.startswith("scene.")
                      if k.split(".")[1].isdigit()})
    scene, spec = [], []
    for i in indices:
        kind = _get(raw, f"scene.{i}.kind", str)
        center = _get(raw, f"scene.{i}.center", _point, (0.0, 0.0))
        radius = _get(raw, f"scene.{i}.radius", float, None) if f"scene.{i}.radius" in raw else None
        try:
            scene.append(geometry.make_shape(kind, center, radius))
        except ValueError as exc:
            raise ConfigError(f"scene.{i}: {exc}") from None
        spec.append((scene[-1].kind.value, scene[-1].center, radius))

    g = imaging.DEFAULT_GRIDS[mode]
    try:
        grid = imaging.GridSpec(
            _get(raw, "grid.x0", float, g.x0), _get(raw, "grid.x1", float, g.x1),
            _get(raw, "grid.y0", float, g.y0), _get(raw, "grid.y1", float, g.y1),
            _get(raw, "grid.nx", int, g.nx, positive=True),
            _get(raw, "grid.ny", int, g.ny, positive=True),
        )
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None

    cfg = PipelineConfig(
        mode=mode,
        scene=scene,
        scene_spec=spec,
        k=_get(raw, "k", float, d["k"], positive=True),
        ring_radius=_get(raw, "ring.radius", float, d["ring.radius"], positive=True),
        ring_count=_get(raw, "ring.count", int, d["ring.count"], positive=True),
        n_bie=_get(raw, "n_bie", int, d["n_bie"], positive=True),
        noise_delta=_get(raw, "noise.delta", float, 0.0, nonneg=True),
        noise_seed=seed if seed is not None else _get(raw, "noise.seed", int, 0, nonneg=True),
        truncation=_get(raw, "probe.truncation", int, imaging.DEFAULT_TRUNCATION[mode], nonneg=True),
        normalization=_get(raw, "probe.normalization", str, "delta"),
        grid=grid,
        save_nfm=_get(raw, "output.save_nfm", _bool, True),
    )
    if cfg.normalization not in imaging.NORMALIZATIONS:
        raise ConfigError(f"probe.normalization must be one of {imaging.NORMALIZATIONS}")
    if cfg.n_bie % 2 or cfg.n_bie < 16:
        raise ConfigError("n_bie must be an even integer >= 16")
    if "aperture.alpha" in raw:
        if mode is not Mode.OBSTACLE:
            raise ConfigError("limited aperture is only supported in obstacle mode")
        cfg.aperture_alpha = _get(raw, "aperture.alpha", float, positive=True)
        cfg.aperture_center = _get(raw, "aperture.center", float, np.pi / 2)
        cfg.aperture_J = _get(raw, "aperture.J", int, 50, nonneg=True)
        cfg.aperture_eps = _get(raw, "aperture.eps", float, 1e-3, positive=True)
        if cfg.aperture_alpha > np.pi:
            raise ConfigError("aperture.alpha must not exceed pi")
        if 2 * cfg.aperture_J + 1 > cfg.ring_count:
            raise ConfigError("aperture.J too large: need 2J+1 <= ring.count")
    return cfg


def load_config(path, seed=None):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return build_config(parse_config_text(text), seed)


def render_heatmap(grid, path):
    """8-bit grayscale PNG, one pixel per node, top row = largest y."""
    v = np.clip(np.asarray(grid.values, dtype=float), 0.0, 1.0)
    pixels = np.rint(v[::-1] * 255).astype(np.uint8)
    Image.fromarray(pixels, mode="L").save(path, format="PNG")


def sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, params, artifacts):
    lines = [f"{k}={params[k]}" for k in sorted(params)]
    lines += [f"artifact.{name}={Path(p).name}" for name, p in artifacts.items()]
    lines += [f"artifact.{name}.sha256={sha256(p)}" for name, p in artifacts.items()]
    Path(path).write_text("\n".join(lines) + "\n")


class Run:
    """Collects written artifacts so that a failed run can be rolled back."""

    def __init__(self, outdir):
        self.outdir = Path(outdir)
        self.artifacts = {}

    def path(self, name, filename):
        p = self.outdir / filename
        self.artifacts[name] = p
        return p

    def rollback(self):
        for p in self.artifacts.values():
            try:
                p.unlink()
            except FileNotFoundError:
                pass


def _stage(name, fn, *args, **kwargs):
    log.info("stage %s", name)
    try:
        return fn(*args, **kwargs)
    except (OSError, FormatError):
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def _image(run, tag, nf, cfg, threads, heatmap):
    grid = _stage(f"image-{tag}", imaging.sweep, nf, cfg.grid, cfg.truncation, threads,
                  cfg.normalization)
    grid.save(run.path(f"img_{tag}", f"{tag}.img"))
    if heatmap:
        render_heatmap(grid, run.path(f"png_{tag}", f"{tag}.png"))
    return grid


def run_pipeline(cfg, outdir, threads=None, heatmap=False):
    """Run the full pipeline; returns the mapping of written artifacts."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    run = Run(outdir)
    try:
        ring = nearfield.SensorRing(cfg.ring_radius, cfg.ring_count, cfg.mode)
        clean = _stage("synthesize", nearfield.synthesize, cfg.scene, ring, cfg.k, cfg.n_bie)
        if cfg.save_nfm:
            nearfield.save(clean, run.path("nfm_clean", "clean.nfm"))
        noisy = _stage("noise", nearfield.add_noise, clean, cfg.noise_delta, cfg.noise_seed)
        if cfg.save_nfm:
            nearfield.save(noisy, run.path("nfm_noisy", "noisy.nfm"))
        _image(run, "full", noisy, cfg, threads, heatmap)

        if cfg.aperture_alpha is not None:
            start, count = nearfield.arc_around(ring, cfg.aperture_center, cfg.aperture_alpha)
            arc = _stage("restrict", nearfield.restrict, clean, start, count)
            limited = _stage("noise-limited", nearfield.add_noise, arc, cfg.noise_delta,
                             cfg.noise_seed)
            done = _stage("complete", completion.complete_matrix, limited, cfg.aperture_J,
                          cfg.aperture_eps, threads)
            if cfg.save_nfm:
                nearfield.save(limited, run.path("nfm_limited", "limited.nfm"))
                nearfield.save(done, run.path("nfm_completed", "completed.nfm"))
            _image(run, "limited", limited, cfg, threads, heatmap)
            _image(run, "completed", done, cfg, threads, heatmap)

        params = cfg.resolved()
        params["threads"] = threads if threads is not None else "auto"
        manifest = outdir / "manifest.txt"
        write_manifest(manifest, params, dict(run.artifacts))
        run.artifacts["manifest"] = manifest
    except BaseException:
        run.rollback()
        raise
    return run.artifacts


def _exit_code(exc):
    cause = exc.cause if isinstance(exc, StageError) else exc
    if isinstance(cause, (OSError, FormatError)):
        return EXIT_IO
    if isinstance(cause, (ArithmeticError, np.linalg.LinAlgError)):
        return EXIT_NUMERIC
    if isinstance(cause, (ValueError, TypeError)):
        return EXIT_CONFIG
    return EXIT_NUMERIC


def _cmd_pipeline(args):
    if not args.config:
        raise ConfigError("pipeline requires --config")
    cfg = load_config(args.config, args.seed)
    for name, p in run_pipeline(cfg, args.output_dir, args.threads, args.heatmap).items():
        log.info("wrote %s: %s", name, p)


def _cmd_synthesize(args):
    if not args.config:
        raise ConfigError("synthesize requires --config")
    cfg = load_config(args.config, args.seed)
    ring = nearfield.SensorRing(cfg.ring_radius, cfg.ring_count, cfg.mode)
    nf = _stage("synthesize", nearfield.synthesize, cfg.scene, ring, cfg.k, cfg.n_bie)
    _save_output(nf, args, "clean.nfm")


def _output_path(args, default):
    path = Path(args.output) if args.output else Path(args.output_dir) / default
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _save_output(nf, args, default):
    path = _output_path(args, default)
    try:
        nearfield.save(nf, path)
    except BaseException:
        path.unlink(missing_ok=True)
        raise
    log.info("wrote %s", path)


def _cmd_noise(args):
    nf = nearfield.load(args.input)
    seed = 0 if args.seed is None else args.seed
    _save_output(_stage("noise", nearfield.add_noise, nf, args.delta, seed), args, "noisy.nfm")


def _cmd_restrict(args):
    nf = nearfield.load(args.input)
    if args.start is not None:
        start, count = args.start, args.count
        if count is None:
            raise ConfigError("--start requires --count")
    else:
        start, count = nearfield.arc_around(nf.ring, args.center, args.alpha)
    _save_output(_stage("restrict", nearfield.restrict, nf, start, count), args, "limited.nfm")


def _cmd_complete(args):
    nf = nearfield.load(args.input)
    done = _stage("complete", completion.complete_matrix, nf, args.J, args.eps, args.threads)
    _save_output(done, args, "completed.nfm")


def _cmd_image(args):
    nf = nearfield.load(args.input)
    if args.config:
        cfg = load_config(args.config)
        spec, trunc, norm = cfg.grid, cfg.truncation, cfg.normalization
    else:
        spec, trunc, norm = None, None, "delta"
    grid = _stage("image", imaging.sweep, nf, spec, trunc, args.threads, norm)
    path = _output_path(args, "image.img")
    written = [path]
    try:
        grid.save(path)
        if args.heatmap:
            written.append(path.with_suffix(".png"))
            render_heatmap(grid, written[-1])
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    log.info("wrote %s", path)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value configuration file")
    common.add_argument("--output-dir", default=".", help="directory for outputs")
    common.add_argument("--threads", type=int, default=None,
                        help="worker cap (default: hardware concurrency)")
    common.add_argument("--heatmap", action="store_true", help="also write PNG heatmaps")
    common.add_argument("--seed", type=int, default=None, help="noise seed (overrides config)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="nfsampling", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("pipeline", parents=[common], help="run every stage from a config")
    p = sub.add_parser("synthesize", parents=[common], help="simulate a clean NFM file")
    p.add_argument("-o", "--output")

    p = sub.add_parser("noise", parents=[common], help="add relative Gaussian noise")
    p.add_argument("input")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("-o", "--output")

    p = sub.add_parser("restrict", parents=[common], help="cut out a limited aperture")
    p.add_argument("input")
    p.add_argument("--alpha", type=float, default=np.pi / 2, help="half-aperture (rad)")
    p.add_argument("--center", type=float, default=np.pi / 2, help="arc midpoint angle (rad)")
    p.add_argument("--start", type=int, help="first sensor index (overrides --alpha/--center)")
    p.add_argument("--count", type=int)
    p.add_argument("-o", "--output")

    p = sub.add_parser("complete", parents=[common], help="complete limited-aperture data")
    p.add_argument("input")
    p.add_argument("--J", type=int, default=50)
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("-o", "--output")

    p = sub.add_parser("image", parents=[common], help="sweep the sampling indicator")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    return parser


COMMANDS = {
    "pipeline": _cmd_pipeline,
    "synthesize": _cmd_synthesize,
    "noise": _cmd_noise,
    "restrict": _cmd_restrict,
    "complete": _cmd_complete,
    "image": _cmd_image,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.threads is not None and args.threads < 1:
        log.error("--threads must be at least 1")
        return EXIT_CONFIG
    try:
        COMMANDS[args.command](args)
    except Exception as exc:
        code = _exit_code(exc)
        log.error("%s", exc)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
