"""Model-side exporter for the camsel toolkit's wire formats."""

from .dataset import Dataset, Sample, load_dataset, make_toy_dataset
from .export import (
    ExportJob,
    export_masks,
    export_pair_dump,
    export_probabilities,
    run_pair_dump_job,
    run_probability_job,
    train_job_model,
)
from .models import BACKBONES, SmallConvNet, build_backbone

__version__ = "0.1.0"
