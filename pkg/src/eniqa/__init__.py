"""No-reference color image quality from entropy features and SVMs."""

__version__ = "0.1.0"

from .features import FeatureConfig, extract_features  # noqa: E402
from .imgio import load_image  # noqa: E402
from .pipeline import EniqaModel, predict_score, train_eniqa  # noqa: E402

__all__ = ["FeatureConfig", "EniqaModel", "extract_features", "load_image", "predict_score",
           "train_eniqa", "__version__"]
