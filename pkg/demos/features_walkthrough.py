"""Walk through the pieces behind one feature vector on a synthetic texture."""
import numpy as np

from eniqa.dataset import synth_distort, synth_texture
from eniqa.entropy import entropy_2d, mutual_info, neighbor_mean_map
from eniqa.features import extract_features, feature_names, partition_patches, select_salient_patches
from eniqa.imgio import to_grayscale
from eniqa.spectral import apply_filter_bank, spectral_residual_saliency

ref = synth_texture(128, seed=3)  # (128, 128, 3) uint8
gray = to_grayscale(ref)

# 2D entropy of (pixel, mean of its 8 neighbors)
nmm = neighbor_mean_map(gray)
print("TE of the whole gray image: %.4f bits" % entropy_2d(gray, nmm))

# channel dependence
r, g, b = (ref[..., c] for c in range(3))
print("MI(R,G) = %.4f  MI(R,B) = %.4f  MI(G,B) = %.4f"
      % (mutual_info(r, g), mutual_info(r, b), mutual_info(g, b)))

# saliency decides which 8x8 patches count
sal = spectral_residual_saliency(gray)
grid = select_salient_patches(partition_patches(128, 128, 8, 8), sal, 0.8)
print("patches: %d total, %d kept" % (len(grid), grid.kept.sum()))

# eight log-Gabor sub-bands, ordered wavelength-major
for i, band in enumerate(apply_filter_bank(gray)):
    q = band.quantized
    print("band %d  TE %.4f" % (i, entropy_2d(q, neighbor_mean_map(q))))

# full vector, and how it moves under noise and blur
names = feature_names()
v0 = extract_features(ref)
for kind, level in [("WN", 8.0), ("GBLUR", 3.0)]:
    v = extract_features(synth_distort(ref, kind, level, seed=1))
    top = np.argsort(-np.abs(v - v0))[:5]
    print(kind, "largest shifts:", ", ".join("%s %+.3f" % (names[i], v[i] - v0[i]) for i in top))
