"""elign: alignment, augmentation and evaluation toolkit for parallel EL/HE speech corpora."""

__version__ = "0.1.0"

from .audio import Waveform, load_wav, resample, save_wav
from .fmat import FeatureMatrix, read_fmat, write_fmat

__all__ = [
    "Waveform",
    "load_wav",
    "save_wav",
    "resample",
    "FeatureMatrix",
    "read_fmat",
    "write_fmat",
    "__version__",
]
