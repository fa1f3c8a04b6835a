"""Repeated content-separated evaluation and a small (C, gamma) grid."""
import tempfile

from eniqa.dataset import make_synthetic_corpus
from eniqa.evaluate import EvalConfig, cross_validate, grid_search
from eniqa.featurestore import compute_features
from eniqa.svm import SvmParams

work = tempfile.mkdtemp(prefix="eniqa_eval_")
manifest = make_synthetic_corpus(work, n_refs=10, size=96, seed=1)
F = compute_features(manifest.paths, jobs=2)

# stock parameters first: the model is close to constant
for params in (SvmParams(), SvmParams(C=10.0, gamma=0.05)):
    rep = cross_validate(manifest, F, EvalConfig(trials=20, params=params))
    print("C=%g gamma=%g" % (params.C, params.gamma))
    print(rep.to_text())

# grid over a few values; each cell is a short cross-validation
for row in grid_search(manifest, F, [1.0, 10.0, 100.0], [0.01, 0.05], EvalConfig(trials=5)):
    print("C=%g gamma=%g  SROCC %.3f  accuracy %.3f" % row)
