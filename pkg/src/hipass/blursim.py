"""Synthetic sharp scenes, the frame-averaging blur model, and dataset I/O.

A blurry frame is the camera response applied to the mean of B consecutive
sharp frames. Scenes are textured patches translating at constant velocity,
so per-pixel ground-truth flow is known exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, FormatError, PreconditionError
from .tensorops import VideoClip
from .vten import read_tensors, write_tensors

TEXTURES = ("checker", "gaussian-blob", "text-grating", "random-noise-patch")
CRF_KINDS = ("identity", "gamma")


@dataclass
class SceneElement:
    """A textured patch moving at constant velocity.

    ``position`` is the (y, x) top-left corner at frame 0 (blob center offset
    is handled by the texture), ``velocity`` is (vy, vx) in px/frame, ``scale``
    sets the texture's internal frequency (cell size, period, sigma) and
    ``size`` the square patch edge in pixels. ``allow_clip`` marks elements
    intentionally larger than the canvas (full-frame backdrops) so rendering
    them does not warn.
    """

    texture: str
    position: tuple
    velocity: tuple
    scale: float = 4.0
    size: int = 16
    intensity: float = 1.0
    seed: int = 0
    allow_clip: bool = False

    def __post_init__(self):
        if self.texture not in TEXTURES:
            raise ValueError(f"unknown texture {self.texture!r}, expected one of {TEXTURES}")
        if not all(np.isfinite(v) for v in self.velocity):
            raise PreconditionError("element velocity must be finite")
        if self.size < 1 or self.scale <= 0:
            raise PreconditionError("element size and scale must be positive")
        if not 0.0 <= self.intensity <= 1.0:
            raise PreconditionError("element intensity must lie in [0, 1]")


@dataclass
class SceneSpec:
    """Canvas extents, elements, frame count and background level."""

    canvas: tuple
    elements: list
    duration: int
    seed: int = 0
    background: float = 0.0

    def __post_init__(self):
        if self.duration < 3:
            raise PreconditionError("scene duration must be >= 3 frames")
        if len(self.canvas) != 2 or min(self.canvas) < 4:
            raise DimensionError(f"canvas must be (H, W) with extents >= 4, got {self.canvas}")
        if not 0.0 <= self.background <= 1.0:
            raise PreconditionError("background must lie in [0, 1]")


def _texture_values(element: SceneElement, ly: np.ndarray, lx: np.ndarray) -> np.ndarray:
    """Sample the texture at local continuous coordinates in [0, size)."""
    s = element.scale
    if element.texture == "checker":
        return element.intensity * (
            (np.floor(ly / s) + np.floor(lx / s)).astype(np.int64) % 2)
    if element.texture == "gaussian-blob":
        c = element.size / 2.0
        return element.intensity * np.exp(-((ly - c) ** 2 + (lx - c) ** 2) / (2.0 * s * s))
    if element.texture == "text-grating":
        return element.intensity * (np.floor(lx / s).astype(np.int64) % 2)
    # random-noise-patch: a frozen noise grid sampled nearest-neighbor
    rng = np.random.default_rng(element.seed)
    grid = rng.uniform(0.0, 1.0, size=(element.size, element.size)) * element.intensity
    iy = np.clip(np.floor(ly).astype(np.intp), 0, element.size - 1)
    ix = np.clip(np.floor(lx).astype(np.intp), 0, element.size - 1)
    return grid[iy, ix]


def render_sharp_sequence(spec: SceneSpec):
    """Render the scene; returns (VideoClip, flows).

    ``flows`` has shape (T-1, 2, H, W): flows[i] is the forward flow from
    frame i to i+1, channel 0 horizontal (u = vx), channel 1 vertical
    (v = vy), equal to the element velocity on the element's pixels and zero
    on the background. Elements are painted in list order (later wins);
    a clipped element triggers a warning once.
    """
    h, w = spec.canvas
    t_total = spec.duration
    frames = np.full((t_total, 1, h, w), spec.background, dtype=np.float64)
    flows = np.zeros((t_total - 1, 2, h, w), dtype=np.float64)
    clipped = set()
    for idx, el in enumerate(spec.elements):
        for t in range(t_total):
            py = el.position[0] + el.velocity[0] * t
            px = el.position[1] + el.velocity[1] * t
            y0, x0 = int(np.floor(py)), int(np.floor(px))
            y1, x1 = y0 + el.size + 1, x0 + el.size + 1
            cy0, cx0 = max(y0, 0), max(x0, 0)
            cy1, cx1 = min(y1, h), min(x1, w)
            if (y0 < 0 or x0 < 0 or y1 > h or x1 > w) and idx not in clipped \
                    and not el.allow_clip:
                clipped.add(idx)
                warnings.warn(f"element {idx} extends past the canvas and was clipped",
                              stacklevel=2)
            if cy0 >= cy1 or cx0 >= cx1:
                continue
            yy, xx = np.meshgrid(np.arange(cy0, cy1), np.arange(cx0, cx1), indexing="ij")
            ly = yy - py
            lx = xx - px
            inside = (ly >= 0) & (ly < el.size) & (lx >= 0) & (lx < el.size)
            if not inside.any():
                continue
            vals = _texture_values(el, ly, lx)
            region = frames[t, 0, cy0:cy1, cx0:cx1]
            region[inside] = vals[inside]
            if t < t_total - 1:
                flows[t, 0, cy0:cy1, cx0:cx1][inside] = el.velocity[1]
                flows[t, 1, cy0:cy1, cx0:cx1][inside] = el.velocity[0]
    np.clip(frames, 0.0, 1.0, out=frames)
    return VideoClip(frames), flows


@dataclass
class BlurConfig:
    """Window length B, sampling stride, and camera response function."""

    b: int = 5
    stride: int = 1
    crf: str = "identity"
    gamma: float = 2.2

    def __post_init__(self):
        if self.b < 1:
            raise PreconditionError("blur window B must be >= 1")
        if self.stride < 1:
            raise PreconditionError("stride must be >= 1")
        if self.crf not in CRF_KINDS:
            raise ValueError(f"unknown CRF {self.crf!r}, expected one of {CRF_KINDS}")
        if self.gamma <= 0:
            raise PreconditionError("gamma must be positive")


def apply_crf(values: np.ndarray, cfg: BlurConfig) -> np.ndarray:
    if cfg.crf == "identity":
        return values
    return np.power(values, 1.0 / cfg.gamma)


def accumulate_blur(sharp: VideoClip, cfg: BlurConfig) -> VideoClip:
    """Average B-frame windows with the given stride, then apply the CRF.

    Output length is floor((T - B) / stride) + 1; requires T >= B.
    """
    t_in = len(sharp)
    if t_in < cfg.b:
        raise DimensionError(f"clip of {t_in} frames is shorter than B={cfg.b}")
    n_out = (t_in - cfg.b) // cfg.stride + 1
    out = np.empty((n_out,) + sharp.data.shape[1:], dtype=np.float64)
    for k in range(n_out):
        start = k * cfg.stride
        out[k] = sharp.data[start:start + cfg.b].mean(axis=0)
    out = apply_crf(out, cfg)
    np.clip(out, 0.0, 1.0, out=out)
    return VideoClip(out, frame_rate=sharp.frame_rate / cfg.stride)


@dataclass
class DatasetSample:
    """A blurry clip, the temporally centered sharp latent frames, and
    per-frame-pair ground-truth flow (forward, frame i -> i+1)."""

    blurry: VideoClip
    sharp: VideoClip
    flow_gt: np.ndarray

    def __post_init__(self):
        if len(self.blurry) != len(self.sharp):
            raise DimensionError(
                f"blurry/sharp length mismatch {len(self.blurry)} vs {len(self.sharp)}")
        flow = np.asarray(self.flow_gt, dtype=np.float64)
        expect = (len(self.blurry) - 1, 2) + self.blurry.data.shape[2:]
        if flow.shape != expect:
            raise DimensionError(f"flow_gt shape {flow.shape}, expected {expect}")
        self.flow_gt = flow


def sample_from_scene(spec: SceneSpec, blur: BlurConfig, out_frames: int) -> DatasetSample:
    """Render a scene and derive the (blurry, sharp, flow) triple.

    The sharp frame paired with blurry frame k is the window center
    k*stride + B//2; the flow between blurry frames k and k+1 is the
    velocity field at that center scaled by the stride (exact under
    constant per-element velocity).
    """
    needed = (out_frames - 1) * blur.stride + blur.b
    if spec.duration < needed:
        raise DimensionError(
            f"scene duration {spec.duration} too short for {out_frames} output frames "
            f"(needs {needed})")
    sharp_full, flows_full = render_sharp_sequence(spec)
    blurry = accumulate_blur(sharp_full, blur)
    blurry = VideoClip(blurry.data[:out_frames], blurry.frame_rate)
    centers = [k * blur.stride + blur.b // 2 for k in range(out_frames)]
    sharp = VideoClip(sharp_full.data[centers], blurry.frame_rate)
    flow = np.stack([flows_full[c] * blur.stride for c in centers[:-1]]) \
        if out_frames > 1 else np.zeros((0, 2) + tuple(spec.canvas))
    return DatasetSample(blurry, sharp, flow)


def _backdrop_element(rng: np.random.Generator, canvas, duration: int,
                      max_speed: float) -> SceneElement:
    """A translating texture sized to cover the whole canvas for the full
    clip, so every pixel carries motion blur.

    The texture is a checkerboard: its fundamental survives box blur under
    any motion direction, so the restoration target stays recoverable.
    Speeds sit in the upper fifth of the allowed range so blur strength is
    similar across samples; direction, phase, cell size and contrast vary.
    """
    h, w = canvas
    speed = rng.uniform(0.8 * max_speed, max_speed)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    velocity = (speed * np.sin(angle), speed * np.cos(angle))
    margin = int(np.ceil(speed * (duration - 1))) + 1
    return SceneElement(
        texture="checker", position=(-margin - rng.uniform(0, 10),
                                     -margin - rng.uniform(0, 10)),
        scale=float(rng.integers(4, 6)), velocity=velocity,
        size=max(h, w) + 2 * margin + 10,
        intensity=float(rng.uniform(0.7, 1.0)),
        seed=int(rng.integers(2 ** 31)), allow_clip=True,
    )


def make_random_scene(rng: np.random.Generator, canvas, duration: int,
                      n_elements=(1, 3), max_speed: float = 2.0,
                      backdrop: bool = False) -> SceneSpec:
    """Draw a random scene: 1-3 textured patches with random motion.

    With ``backdrop`` the scene is instead a single full-canvas translating
    texture; blur then degrades every pixel instead of only small patch
    footprints, which makes restoration gains much larger and keeps the
    task statistics consistent across samples.
    """
    h, w = canvas
    if backdrop:
        return SceneSpec(
            canvas=tuple(canvas),
            elements=[_backdrop_element(rng, canvas, duration, max_speed)],
            duration=duration, seed=int(rng.integers(2 ** 31)),
            background=float(rng.uniform(0.05, 0.2)))
    count = int(rng.integers(n_elements[0], n_elements[1] + 1))
    elements = []
    for _ in range(count):
        texture = TEXTURES[int(rng.integers(len(TEXTURES)))]
        size = int(rng.integers(max(8, min(h, w) // 4), max(9, min(h, w) // 2)))
        scale = {"checker": float(rng.integers(2, 5)),
                 "gaussian-blob": size / 5.0,
                 "text-grating": float(rng.integers(2, 5)),
                 "random-noise-patch": 1.0}[texture]
        speed = rng.uniform(0.4, max_speed)
        # cap the travel so the whole trajectory stays on canvas
        max_travel = max((min(h, w) - size - 2) / 2.0, 0.5)
        if speed * (duration - 1) > max_travel:
            speed = max_travel / (duration - 1)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        velocity = (speed * np.sin(angle), speed * np.cos(angle))
        travel_y = velocity[0] * (duration - 1)
        travel_x = velocity[1] * (duration - 1)
        lo_y = max(0.0, -travel_y)
        hi_y = max(h - size - 1 - max(0.0, travel_y), lo_y)
        lo_x = max(0.0, -travel_x)
        hi_x = max(w - size - 1 - max(0.0, travel_x), lo_x)
        oy = rng.uniform(lo_y, hi_y)
        ox = rng.uniform(lo_x, hi_x)
        elements.append(SceneElement(
            texture=texture, position=(oy, ox), velocity=velocity,
            scale=scale, size=size,
            intensity=float(rng.uniform(0.6, 1.0)),
            seed=int(rng.integers(2 ** 31)),
        ))
    return SceneSpec(canvas=tuple(canvas), elements=elements, duration=duration,
                     seed=int(rng.integers(2 ** 31)),
                     background=float(rng.uniform(0.05, 0.2)))


def build_sample(seed: int, canvas, out_frames: int, blur: BlurConfig,
                 max_speed: float = 2.0, backdrop: bool = False) -> DatasetSample:
    """Deterministically build one dataset sample from a scalar seed."""
    rng = np.random.default_rng(seed)
    duration = (out_frames - 1) * blur.stride + blur.b
    spec = make_random_scene(rng, canvas, duration, max_speed=max_speed,
                             backdrop=backdrop)
    return sample_from_scene(spec, blur, out_frames)


def build_dataset(n_samples: int, canvas, out_frames: int, blur: BlurConfig,
                  seed: int = 0, max_speed: float = 2.0, workers: int = 1,
                  backdrop: bool = False) -> list:
    """Build ``n_samples`` independent samples with per-sample child seeds.

    ``workers`` > 1 builds samples in a thread pool; results are identical
    regardless of worker count because each sample owns its seed.
    """
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n_samples)]

    def one(s):
        return build_sample(s, canvas, out_frames, blur, max_speed, backdrop)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, seeds))
    return [one(s) for s in seeds]


def write_dataset(path, samples) -> None:
    """Serialize samples to a VTEN1 container; an empty list is a valid file."""
    tensors = []
    for i, s in enumerate(samples):
        prefix = f"s{i:05d}"
        tensors.append((f"{prefix}/blurry", s.blurry.data))
        tensors.append((f"{prefix}/sharp", s.sharp.data))
        tensors.append((f"{prefix}/flow", s.flow_gt))
        tensors.append((f"{prefix}/rate", np.array([s.blurry.frame_rate, s.sharp.frame_rate])))
    write_tensors(path, tensors)


def read_dataset(path) -> list:
    """Read back a dataset container written by :func:`write_dataset`."""
    tensors = read_tensors(path)
    prefixes = sorted({name.split("/", 1)[0] for name in tensors})
    samples = []
    for prefix in prefixes:
        try:
            blurry = tensors[f"{prefix}/blurry"]
            sharp = tensors[f"{prefix}/sharp"]
            flow = tensors[f"{prefix}/flow"]
            rate = tensors[f"{prefix}/rate"]
        except KeyError as exc:
            raise FormatError(f"{path}: sample {prefix} is missing record {exc}") from exc
        samples.append(DatasetSample(
            blurry=VideoClip(blurry, float(rate[0])),
            sharp=VideoClip(sharp, float(rate[1])),
            flow_gt=flow,
        ))
    return samples


def write_clip(path, clip: VideoClip) -> None:
    """Store a single clip as a VTEN1 container."""
    write_tensors(path, [("clip", clip.data), ("rate", np.array([clip.frame_rate]))])


def read_clip(path) -> VideoClip:
    tensors = read_tensors(path)
    if "clip" not in tensors:
        raise FormatError(f"{path}: no 'clip' record")
    rate = float(tensors.get("rate", np.array([24.0]))[0])
    return VideoClip(tensors["clip"], rate)
