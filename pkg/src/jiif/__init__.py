"""Joint implicit image function (JIIF) for RGB-guided depth super-resolution."""

from src.jiif.config import RunConfig, load_run_config
from src.jiif.model import JIIFModel, build_model

__all__ = ["JIIFModel", "RunConfig", "build_model", "load_run_config"]
