"""Train a model on a small synthetic corpus, save it, reload it, score images."""
import os
import tempfile

import numpy as np

from eniqa import EniqaModel, load_image, predict_score, train_eniqa
from eniqa.dataset import make_synthetic_corpus, synth_distort, synth_texture
from eniqa.featurestore import compute_features
from eniqa.modelio import load_model, save_model
from eniqa.svm import SvmParams

work = tempfile.mkdtemp(prefix="eniqa_demo_")
manifest = make_synthetic_corpus(os.path.join(work, "corpus"), n_refs=6, size=96, seed=0)
print(len(manifest), "distorted images, labels", sorted(set(manifest.label_list)))

F = compute_features(manifest.paths, cache_dir=os.path.join(work, "cache"))

# the stock C = gamma = 1e-4 are far too weak for these features; see `eniqa grid`
params = SvmParams(C=10.0, gamma=0.05)
model = train_eniqa(F, manifest.label_list, manifest.scores, params)
print("classes:", model.classes)

path = os.path.join(work, "model.txt")
save_model(path, model)
model2 = load_model(path)
assert isinstance(model2, EniqaModel)

# unseen content, increasing noise: score should grow (scores are DMOS-like here)
ref = synth_texture(96, seed=99)
for sigma in (2.0, 6.0, 10.0):
    p = predict_score(model2, synth_distort(ref, "WN", sigma, seed=7))
    probs = " ".join("%s=%.2f" % kv for kv in p.probs.items())
    print("WN sigma %4.1f -> score %.2f  (%s)" % (sigma, p.score, probs))

# same thing from a file on disk
p = predict_score(model2, load_image(manifest.paths[0]))
print(os.path.basename(manifest.paths[0]), "->", round(p.score, 3),
      "true", manifest.scores[0])
print("bit-exact reload:", np.array_equal(
    [predict_score(model, load_image(q)).score for q in manifest.paths[:3]],
    [predict_score(model2, load_image(q)).score for q in manifest.paths[:3]]))
