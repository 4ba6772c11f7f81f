"""Latent-diffusion score exporter for the concept-lens ingestion format."""

from .export import ExportJob, GridError, PromptGrid, export
from .pipeline import LatentDiffusionPipeline, PipelineConfig, create_checkpoint
from .scheduler import DdimScheduler
from .text import TextEncoder, tokenize
from .unet import CondUNet

__version__ = "0.1.0"
