"""Dataset manifests, content-separated splits and synthetic test corpora.

Manifest CSV format::

    # polarity=DMOS
    path,label,score,reference_id
    jp2k/img1.bmp,JP2K,42.5,buildings
    ...

``polarity`` is ``DMOS`` (higher is worse) or ``MOS`` (higher is better).
Relative paths are resolved against the manifest's directory.
"""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .imgio import round_half_away, save_image

__all__ = [
    "Record",
    "DatasetManifest",
    "ManifestError",
    "SplitError",
    "HIGHER_IS_WORSE",
    "HIGHER_IS_BETTER",
    "parse_manifest",
    "read_manifest",
    "write_manifest",
    "split_by_reference",
    "synth_distort",
    "white_noise",
    "synth_texture",
    "make_synthetic_corpus",
]

HIGHER_IS_WORSE = "DMOS"
HIGHER_IS_BETTER = "MOS"
COLUMNS = ("path", "label", "score", "reference_id")


class ManifestError(ValueError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = "row %d: %s" % (row, message)
        super().__init__(message)


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class Record:
    path: str
    label: str
    score: float
    reference_id: str


@dataclass
class DatasetManifest:
    records: list
    score_polarity: str = HIGHER_IS_WORSE
    labels: tuple = field(default=())

    def __post_init__(self):
        if self.score_polarity not in (HIGHER_IS_WORSE, HIGHER_IS_BETTER):
            raise ManifestError("unknown polarity %r" % self.score_polarity)
        seen = set()
        for r in self.records:
            if r.path in seen:
                raise ManifestError("duplicate path %r" % r.path)
            seen.add(r.path)
            if not r.reference_id:
                raise ManifestError("empty reference_id for %r" % r.path)
        found = tuple(dict.fromkeys(r.label for r in self.records))
        if not self.labels:
            self.labels = found
        else:
            unknown = set(found) - set(self.labels)
            if unknown:
                raise ManifestError("labels %s are not declared" % sorted(unknown))

    def __len__(self):
        return len(self.records)

    @property
    def paths(self) -> list:
        return [r.path for r in self.records]

    @property
    def label_list(self) -> list:
        return [r.label for r in self.records]

    @property
    def scores(self) -> np.ndarray:
        return np.array([r.score for r in self.records], dtype=np.float64)

    @property
    def reference_ids(self) -> list:
        return list(dict.fromkeys(r.reference_id for r in self.records))

    def subset(self, indices) -> "DatasetManifest":
        return DatasetManifest([self.records[i] for i in indices], self.score_polarity,
                               self.labels)


def parse_manifest(text: str, base_dir: str = ".") -> DatasetManifest:
    """Parse manifest CSV text; row numbers in errors are 1-based file lines."""
    lines = text.splitlines()
    polarity = None
    body_start = 0
    for n, line in enumerate(lines):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            key, _, value = s[1:].strip().partition("=")
            if key.strip() == "polarity":
                value = value.strip().upper()
                if value not in (HIGHER_IS_WORSE, HIGHER_IS_BETTER):
                    raise ManifestError("unknown polarity %r" % value, n + 1)
                polarity = value
            continue
        body_start = n
        break
    else:
        raise ManifestError("missing header row")
    if polarity is None:
        raise ManifestError("missing '# polarity=DMOS|MOS' line")
    reader = csv.reader(io.StringIO("\n".join(lines[body_start:])))
    header = [h.strip() for h in next(reader)]
    missing = [c for c in COLUMNS if c not in header]
    if missing:
        raise ManifestError("missing column(s) %s" % ", ".join(missing), body_start + 1)
    col = {c: header.index(c) for c in COLUMNS}
    records = []
    seen = set()
    for offset, row in enumerate(reader, start=1):
        lineno = body_start + 1 + offset
        if not row or all(not c.strip() for c in row) or row[0].lstrip().startswith("#"):
            continue
        if len(row) < len(header):
            raise ManifestError("expected %d fields, got %d" % (len(header), len(row)), lineno)
        path = row[col["path"]].strip().replace("\\", "/")
        if not path:
            raise ManifestError("empty path", lineno)
        if not os.path.isabs(path):
            path = os.path.normpath(os.path.join(base_dir, path)).replace(os.sep, "/")
        try:
            score = float(row[col["score"]])
        except ValueError:
            raise ManifestError("unparsable score %r" % row[col["score"]], lineno) from None
        if not math.isfinite(score):
            raise ManifestError("non-finite score %r" % row[col["score"]], lineno)
        label = row[col["label"]].strip()
        ref = row[col["reference_id"]].strip()
        if not label:
            raise ManifestError("empty label", lineno)
        if not ref:
            raise ManifestError("empty reference_id", lineno)
        if path in seen:
            raise ManifestError("duplicate path %r" % path, lineno)
        seen.add(path)
        records.append(Record(path, label, score, ref))
    return DatasetManifest(records, polarity)


def read_manifest(path) -> DatasetManifest:
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    return parse_manifest(text, os.path.dirname(os.path.abspath(path)))


def write_manifest(manifest: DatasetManifest, path) -> None:
    """Write ``manifest`` with paths relative to the output file where possible."""
    base = os.path.dirname(os.path.abspath(path))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("# polarity=%s\n" % manifest.score_polarity)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in manifest.records:
            p = r.path
            if os.path.isabs(p):
                rel = os.path.relpath(p, base)
                if not rel.startswith(".."):
                    p = rel
            w.writerow([p.replace(os.sep, "/"), r.label, repr(float(r.score)), r.reference_id])


def split_by_reference(manifest: DatasetManifest, fraction: float, rng_seed):
    """Partition records by reference content.

    The first ``ceil(fraction * n_refs)`` shuffled reference ids go to the
    training side (at most ``n_refs - 1`` so the test side is never empty).
    """
    if not 0.0 < fraction < 1.0:
        raise SplitError("fraction must lie strictly between 0 and 1, got %r" % fraction)
    refs = manifest.reference_ids
    if len(refs) < 2:
        raise SplitError("need at least 2 reference ids, got %d" % len(refs))
    rng = np.random.default_rng(rng_seed)
    order = rng.permutation(len(refs))
    n_train = min(len(refs) - 1, math.ceil(round(fraction * len(refs), 9)))
    train_refs = {refs[i] for i in order[:n_train]}
    train_idx = [i for i, r in enumerate(manifest.records) if r.reference_id in train_refs]
    test_idx = [i for i, r in enumerate(manifest.records) if r.reference_id not in train_refs]
    return manifest.subset(train_idx), manifest.subset(test_idx)


# ---------------------------------------------------------------- synthetic data


def white_noise(shape, sigma: float, seed) -> np.ndarray:
    return np.random.default_rng(seed).normal(0.0, sigma, size=shape)


def synth_distort(img, kind: str, level: float, seed=0) -> np.ndarray:
    """Apply white noise (``WN``, sigma=level) or Gaussian blur (``GBLUR``, sigma=level)."""
    if not level > 0:
        raise ValueError("level must be positive")
    img = np.asarray(img)
    x = img.astype(np.float64)
    kind = kind.upper()
    if kind == "WN":
        out = x + white_noise(x.shape, level, seed)
    elif kind == "GBLUR":
        radius = int(math.ceil(3.0 * level))
        out = np.empty_like(x)
        for c in range(x.shape[2]):
            out[..., c] = ndimage.gaussian_filter(x[..., c], sigma=level, mode="nearest",
                                                  radius=radius)
    else:
        raise ValueError("unknown distortion kind %r" % kind)
    return np.clip(round_half_away(out), 0, 255).astype(np.uint8)


def synth_texture(size: int = 128, seed=0) -> np.ndarray:
    """Piecewise-smooth color scene: 1/f^1.5 colored noise with flat-ish shapes.

    The flattened shapes leave low-entropy regions, as in natural photos,
    so noise and blur both move the local entropy statistics.
    """
    rng = np.random.default_rng(seed)
    fy = np.fft.fftfreq(size)[:, None]
    fx = np.fft.fftfreq(size)[None, :]
    f = np.hypot(fx, fy)
    f[0, 0] = 1.0
    layers = []
    for _ in range(3):
        spec = f ** -1.5 * np.exp(1j * rng.uniform(0, 2 * np.pi, (size, size)))
        spec[0, 0] = 0
        layer = np.real(np.fft.ifft2(spec))
        layers.append((layer - layer.mean()) / layer.std())
    mix = rng.uniform(0.2, 1.0, (3, 3)) + np.eye(3)
    rgb = 0.6 * np.einsum("ij,jhw->hwi", mix, np.array(layers))
    yy, xx = np.mgrid[:size, :size]
    for _ in range(rng.integers(4, 9)):
        cy, cx = rng.uniform(0, size, 2)
        r = rng.uniform(size / 10, size / 3)
        if rng.random() < 0.5:
            m = (yy - cy) ** 2 + (xx - cx) ** 2 < r * r
        else:
            m = (np.abs(yy - cy) < r) & (np.abs(xx - cx) < r * rng.uniform(0.3, 1.0))
        rgb[m] = 0.3 * rgb[m] + rng.normal(0, 1.5, 3)
    lo, hi = np.percentile(rgb, [1, 99])
    out = 30 + 195 * (rgb - lo) / (hi - lo)
    return np.clip(round_half_away(out), 0, 255).astype(np.uint8)


def make_synthetic_corpus(out_dir, n_refs: int = 12, size: int = 128,
                          levels: dict | None = None, seed: int = 0) -> DatasetManifest:
    """Write pristine textures plus WN/GBLUR versions and a manifest.

    Scores equal the distortion level (higher is worse); pristine images
    are saved but not listed in the manifest.
    """
    levels = levels or {"WN": (2.0, 4.0, 6.0, 8.0, 10.0), "GBLUR": (1.0, 2.0, 3.0, 4.0, 5.0)}
    out_dir = os.path.abspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    records = []
    for r in range(n_refs):
        ref_id = "tex%02d" % r
        ref = synth_texture(size, [seed, r])
        save_image(os.path.join(out_dir, ref_id + ".bmp"), ref)
        for k, (kind, lv) in enumerate(levels.items()):
            for j, level in enumerate(lv):
                name = "%s_%s_%d.bmp" % (ref_id, kind.lower(), j)
                img = synth_distort(ref, kind, level, seed=[seed, r, k, j])
                path = os.path.join(out_dir, name)
                save_image(path, img)
                records.append(Record(path.replace(os.sep, "/"), kind, float(level), ref_id))
    manifest = DatasetManifest(records, HIGHER_IS_WORSE)
    write_manifest(manifest, os.path.join(out_dir, "manifest.csv"))
    return manifest
