"""Synthetic multi-rater dataset: blob geometry, annotator-style masks, on-disk format.

A case is one grayscale image plus A binary masks, one per simulated annotator
style. Styles are morphological offsets of a shared base shape (negative radius
erodes = conservative, positive dilates = inclusive) with optional radial
boundary jitter, so the conservative-to-inclusive ordering is known by
construction and prompt personalization is testable against ground truth.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import DegenerateGeometryError, FormatError, ValidationError

MANIFEST_VERSION = "1"
MANIFEST_NAME = "manifest.json"
PROMPTS_NAME = "prompts.json"


@dataclass(frozen=True)
class StyleSpec:
    """One simulated annotator style.

    morph_radius < 0 erodes the base shape (conservative), > 0 dilates it
    (inclusive). boundary_jitter is the std-dev, in pixels, of smooth radial
    noise applied to the styled boundary.
    """

    style_name: str
    morph_radius: int
    boundary_jitter: float = 0.0
    prompt_texts: tuple[str, ...] = ()

    def __post_init__(self):
        if self.boundary_jitter < 0:
            raise ValidationError(f"boundary_jitter must be >= 0, got {self.boundary_jitter}")
        if not self.prompt_texts:
            raise ValidationError(f"style {self.style_name!r} needs at least one prompt text")
        object.__setattr__(self, "prompt_texts", tuple(self.prompt_texts))


@dataclass
class Case:
    """One image with its ordered set of annotator masks."""

    case_id: str
    image: np.ndarray  # (H, W) float64 in [0, 1]
    masks: list[np.ndarray]  # A arrays (H, W), uint8 in {0, 1}, conservative -> inclusive

    @property
    def height(self) -> int:
        return self.image.shape[0]

    @property
    def width(self) -> int:
        return self.image.shape[1]

    @property
    def n_annotators(self) -> int:
        return len(self.masks)

    def validate(self) -> None:
        if self.image.ndim != 2:
            raise ValidationError(f"image must be 2-D, got shape {self.image.shape}")
        for i, m in enumerate(self.masks):
            if m.shape != self.image.shape:
                raise ValidationError(
                    f"mask {i} shape {m.shape} != image shape {self.image.shape}"
                )
            vals = np.unique(m)
            if not np.all(np.isin(vals, (0, 1))):
                raise ValidationError(f"mask {i} has values outside {{0,1}}: {vals}")


@dataclass(frozen=True)
class GenerationConfig:
    """Geometry and rendering parameters for one synthetic case."""

    height: int = 128
    width: int = 128
    radius_range: tuple[float, float] = (0.16, 0.26)  # fraction of min(H, W)
    n_harmonics: int = 4
    harmonic_amp: float = 0.12
    inside_level: float = 0.70
    outside_level: float = 0.25
    edge_blur: float = 1.0
    gradient_strength: float = 0.10
    noise_std: float = 0.05
    max_attempts: int = 10

    def __post_init__(self):
        if self.height < 32 or self.width < 32:
            raise ValidationError("image side must be at least 32 pixels")


@dataclass(frozen=True)
class ShapeFamily:
    """Harmonic signature shared by all cases of one synthetic 'patient'.

    amplitudes/phases define the angular boundary profile; members of a family
    vary only in scale, rotation, and center, so family-level splitting is the
    synthetic analogue of patient-level splitting.
    """

    amplitudes: tuple[float, ...]
    phases: tuple[float, ...]

    @staticmethod
    def draw(rng: np.random.Generator, cfg: GenerationConfig) -> "ShapeFamily":
        k = np.arange(2, 2 + cfg.n_harmonics)
        amps = rng.uniform(0.2, 1.0, size=cfg.n_harmonics) * cfg.harmonic_amp / (k - 1)
        phases = rng.uniform(0, 2 * np.pi, size=cfg.n_harmonics)
        return ShapeFamily(tuple(amps.tolist()), tuple(phases.tolist()))


def _disk(radius: int) -> np.ndarray:
    y, x = np.ogrid[-radius : radius + 1, -radius : radius + 1]
    return (x * x + y * y) <= radius * radius


def render_base_shape(
    rng: np.random.Generator,
    cfg: GenerationConfig,
    family: ShapeFamily,
    scale: float = 1.0,
) -> np.ndarray:
    """Rasterize one smooth random blob: r(theta) = r0 * (1 + sum_k a_k cos(k theta + phi_k))."""
    h, w = cfg.height, cfg.width
    r0 = rng.uniform(*cfg.radius_range) * min(h, w) * scale
    cy = h / 2 + rng.uniform(-0.08, 0.08) * h
    cx = w / 2 + rng.uniform(-0.08, 0.08) * w
    rot = rng.uniform(0, 2 * np.pi)

    yy, xx = np.mgrid[0:h, 0:w]
    theta = np.arctan2(yy - cy, xx - cx)
    rho = np.hypot(yy - cy, xx - cx)
    boundary = np.full((h, w), r0)
    for j, (a, phi) in enumerate(zip(family.amplitudes, family.phases)):
        boundary = boundary + r0 * a * np.cos((j + 2) * (theta + rot) + phi)
    return (rho <= boundary).astype(np.uint8)


def _radial_jitter(
    mask: np.ndarray, jitter_std: float, rng: np.random.Generator, n_harmonics: int = 4
) -> np.ndarray:
    """Perturb the mask boundary radially by a smooth angular noise field.

    The signed distance to the boundary is shifted by delta(theta) with
    std(delta) = jitter_std pixels; positive delta locally expands the mask.
    """
    if jitter_std == 0:
        return mask
    h, w = mask.shape
    ys, xs = np.nonzero(mask)
    cy, cx = ys.mean(), xs.mean()
    yy, xx = np.mgrid[0:h, 0:w]
    theta = np.arctan2(yy - cy, xx - cx)

    coef = rng.standard_normal(n_harmonics)
    phases = rng.uniform(0, 2 * np.pi, size=n_harmonics)
    # std of sum_k c_k cos(k theta + psi_k) over theta is sqrt(sum c_k^2 / 2)
    norm = np.sqrt(np.sum(coef**2) / 2)
    coef = coef * (jitter_std / norm) if norm > 0 else coef
    delta = np.zeros((h, w))
    for k in range(n_harmonics):
        delta += coef[k] * np.cos((k + 1) * theta + phases[k])

    inside = ndimage.distance_transform_edt(mask)
    outside = ndimage.distance_transform_edt(1 - mask)
    signed = inside - outside
    return (signed + delta > 0).astype(np.uint8)


def apply_style(mask: np.ndarray, style: StyleSpec, rng: np.random.Generator) -> np.ndarray:
    """Erode/dilate by |morph_radius| with a disk element, then jitter the boundary."""
    r = style.morph_radius
    if r > 0:
        styled = ndimage.binary_dilation(mask, structure=_disk(r)).astype(np.uint8)
    elif r < 0:
        styled = ndimage.binary_erosion(mask, structure=_disk(-r)).astype(np.uint8)
    else:
        styled = mask.copy()
    return _radial_jitter(styled, style.boundary_jitter, rng)


def _render_image(
    shape: np.ndarray, cfg: GenerationConfig, rng: np.random.Generator
) -> np.ndarray:
    h, w = shape.shape
    img = cfg.outside_level + (cfg.inside_level - cfg.outside_level) * ndimage.gaussian_filter(
        shape.astype(np.float64), cfg.edge_blur
    )
    ang = rng.uniform(0, 2 * np.pi)
    yy, xx = np.mgrid[0:h, 0:w]
    ramp = (np.cos(ang) * (xx / w - 0.5) + np.sin(ang) * (yy / h - 0.5)) * 2
    img = img + cfg.gradient_strength * ramp
    img = img + rng.normal(0, cfg.noise_std, size=(h, w))
    return np.clip(img, 0.0, 1.0)


def generate_case(
    seed: int,
    config: GenerationConfig,
    styles: list[StyleSpec],
    family: ShapeFamily | None = None,
    case_id: str | None = None,
) -> Case:
    """Generate one case deterministically from the seed.

    Masks are ordered by morph_radius (conservative to inclusive). If a style
    empties its mask or the inter-annotator intersection becomes empty, the
    base shape is regrown up to config.max_attempts times.
    """
    if not styles:
        raise ValidationError("at least one style is required")
    radii = [s.morph_radius for s in styles]
    if len(set(radii)) != len(radii):
        raise ValidationError("styles must have distinct morph_radius values")
    styles = sorted(styles, key=lambda s: s.morph_radius)

    rng = np.random.default_rng(seed)
    if family is None:
        family = ShapeFamily.draw(rng, config)

    for attempt in range(config.max_attempts):
        scale = 1.3**attempt
        shape_rng = np.random.default_rng(rng.integers(0, 2**63))
        base = render_base_shape(shape_rng, config, family, scale=scale)
        masks = [apply_style(base, s, shape_rng) for s in styles]
        intersection = np.logical_and.reduce(masks) if masks else base
        if all(m.any() for m in masks) and intersection.any():
            image = _render_image(base, config, shape_rng)
            return Case(case_id or f"seed{seed}", image, masks)
    raise DegenerateGeometryError(
        f"could not generate non-degenerate masks after {config.max_attempts} attempts (seed={seed})"
    )


DEFAULT_STYLE_CATALOG = (
    StyleSpec("conservative", -2, 0.5, ("conservative mask", "tight boundary, small nodule only")),
    StyleSpec("moderate", 0, 0.5, ("moderate mask", "balanced boundary delineation")),
    StyleSpec("inclusive", 2, 0.5, ("inclusive mask", "include subtle regions")),
    StyleSpec("very_inclusive", 4, 0.5, ("very inclusive mask", "expand to all suspicious regions")),
)


def default_styles(n_annotators: int, boundary_jitter: float | None = None) -> list[StyleSpec]:
    """Pick n styles from the catalog: 2 -> conservative/inclusive, 4 -> the full nested ladder."""
    if n_annotators < 2 or n_annotators > len(DEFAULT_STYLE_CATALOG):
        raise ValidationError(
            f"n_annotators must be in [2, {len(DEFAULT_STYLE_CATALOG)}], got {n_annotators}"
        )
    picks = {
        2: (0, 2),
        3: (0, 1, 2),
        4: (0, 1, 2, 3),
    }[n_annotators]
    styles = [DEFAULT_STYLE_CATALOG[i] for i in picks]
    if boundary_jitter is not None:
        styles = [dataclasses.replace(s, boundary_jitter=boundary_jitter) for s in styles]
    return styles


@dataclass(frozen=True)
class DatasetConfig:
    n_cases: int = 100
    seed: int = 0
    cases_per_family: int = 5
    split_fractions: tuple[float, float, float] = (0.7, 0.1, 0.2)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    styles: tuple[StyleSpec, ...] = ()

    def __post_init__(self):
        styles = self.styles or default_styles(2)
        object.__setattr__(self, "styles", tuple(sorted(styles, key=lambda s: s.morph_radius)))
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ValidationError("split fractions must sum to 1")


@dataclass
class CaseEntry:
    case_id: str
    family: int
    split: str
    image_path: str
    mask_paths: list[str]


@dataclass
class DatasetManifest:
    version: str
    generator_seed: int
    styles: list[StyleSpec]
    cases: list[CaseEntry]
    config: dict
    root: Path | None = None  # directory holding manifest.json; not serialized

    def case_ids(self, split: str | None = None) -> list[str]:
        return [c.case_id for c in self.cases if split is None or c.split == split]

    def entry(self, case_id: str) -> CaseEntry:
        for c in self.cases:
            if c.case_id == case_id:
                return c
        raise KeyError(f"unknown case_id {case_id!r}")

    @property
    def n_annotators(self) -> int:
        return len(self.styles)

    def prompt_catalog(self) -> dict[str, list[str]]:
        return {s.style_name: list(s.prompt_texts) for s in self.styles}

    def to_json(self) -> str:
        payload = {
            "version": self.version,
            "generator_seed": self.generator_seed,
            "styles": [dataclasses.asdict(s) for s in self.styles],
            "cases": [dataclasses.asdict(c) for c in self.cases],
            "config": self.config,
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def _assign_splits(
    n_families: int, fractions: tuple[float, float, float], rng: np.random.Generator
) -> list[str]:
    order = rng.permutation(n_families)
    n_train = int(round(fractions[0] * n_families))
    n_val = int(round(fractions[1] * n_families))
    split_of = [""] * n_families
    for rank, fam in enumerate(order):
        if rank < n_train:
            split_of[fam] = "train"
        elif rank < n_train + n_val:
            split_of[fam] = "val"
        else:
            split_of[fam] = "test"
    return split_of


def _save_gray_png(path: Path, values: np.ndarray) -> None:
    Image.fromarray(values.astype(np.uint8), mode="L").save(path)


def generate_dataset(config: DatasetConfig, out_dir: str | Path, force: bool = False) -> DatasetManifest:
    """Write a complete dataset (manifest, prompts, per-case PNGs) under out_dir.

    Byte-deterministic for a fixed config: per-case seeds derive from
    (seed, family, member) so generation order or parallelism cannot matter.
    """
    if config.n_cases < 8:
        raise ValidationError(f"n_cases must be >= 8, got {config.n_cases}")
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()) and not force:
        raise FileExistsError(f"{out} is not empty; pass force=True (--force) to overwrite")
    (out / "cases").mkdir(parents=True, exist_ok=True)

    styles = list(config.styles)
    n_families = -(-config.n_cases // config.cases_per_family)  # ceil
    split_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0xFA]))
    split_of = _assign_splits(n_families, config.split_fractions, split_rng)

    entries: list[CaseEntry] = []
    for idx in range(config.n_cases):
        fam_idx = idx // config.cases_per_family
        fam_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1, fam_idx]))
        family = ShapeFamily.draw(fam_rng, config.generation)
        case_seed = int(
            np.random.SeedSequence([config.seed, 2, idx]).generate_state(1, np.uint64)[0]
        )
        case_id = f"case_{idx:04d}"
        case = generate_case(case_seed, config.generation, styles, family=family, case_id=case_id)

        case_dir = out / "cases" / case_id
        case_dir.mkdir(parents=True, exist_ok=True)
        _save_gray_png(case_dir / "image.png", np.round(case.image * 255.0))
        mask_paths = []
        for i, mask in enumerate(case.masks, start=1):
            name = f"mask_{i}.png"
            _save_gray_png(case_dir / name, mask * 255)
            mask_paths.append(f"cases/{case_id}/{name}")
        entries.append(
            CaseEntry(case_id, fam_idx, split_of[fam_idx], f"cases/{case_id}/image.png", mask_paths)
        )

    manifest = DatasetManifest(
        version=MANIFEST_VERSION,
        generator_seed=config.seed,
        styles=styles,
        cases=entries,
        config={
            "n_cases": config.n_cases,
            "cases_per_family": config.cases_per_family,
            "split_fractions": list(config.split_fractions),
            "generation": dataclasses.asdict(config.generation),
        },
        root=out,
    )
    (out / MANIFEST_NAME).write_text(manifest.to_json())
    prompts = manifest.prompt_catalog()
    (out / PROMPTS_NAME).write_text(json.dumps(prompts, indent=2, sort_keys=True))
    return manifest


def load_manifest(data_dir: str | Path) -> DatasetManifest:
    root = Path(data_dir)
    path = root / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    raw = json.loads(path.read_text())
    if raw.get("version") != MANIFEST_VERSION:
        raise FormatError(f"unsupported manifest version {raw.get('version')!r}")
    styles = [
        StyleSpec(
            s["style_name"], s["morph_radius"], s["boundary_jitter"], tuple(s["prompt_texts"])
        )
        for s in raw["styles"]
    ]
    cases = [
        CaseEntry(c["case_id"], c["family"], c["split"], c["image_path"], list(c["mask_paths"]))
        for c in raw["cases"]
    ]
    return DatasetManifest(raw["version"], raw["generator_seed"], styles, cases, raw["config"], root)


def load_case(manifest: DatasetManifest, case_id: str) -> Case:
    """Load one case from disk; masks are bit-exact, the image is 8-bit quantized."""
    if manifest.root is None:
        raise ValidationError("manifest has no root directory; load it with load_manifest()")
    entry = manifest.entry(case_id)
    image_path = manifest.root / entry.image_path
    if not image_path.exists():
        raise FileNotFoundError(f"missing image file: {image_path}")
    image = np.asarray(Image.open(image_path), dtype=np.float64) / 255.0
    masks = []
    for rel in entry.mask_paths:
        mask_path = manifest.root / rel
        if not mask_path.exists():
            raise FileNotFoundError(f"missing mask file: {mask_path}")
        arr = np.asarray(Image.open(mask_path))
        if arr.shape != image.shape:
            raise FormatError(
                f"mask {mask_path} shape {arr.shape} != image shape {image.shape}"
            )
        if not np.all(np.isin(np.unique(arr), (0, 255))):
            raise FormatError(f"mask {mask_path} is not binary 0/255")
        masks.append((arr > 127).astype(np.uint8))
    return Case(case_id, image, masks)


def dataset_checksum(data_dir: str | Path) -> str:
    """SHA-256 over every file in the dataset directory, path-ordered."""
    root = Path(data_dir)
    digest = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        digest.update(str(path.relative_to(root)).encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()
