"""From-scratch CNN training and evaluation engine for binary skin-lesion
classification: tensor kernels with analytic gradients, the full layer stack,
Adam + binary cross-entropy training, a deterministic data pipeline, and the
evaluation metrics suite, exposed as a library and a batch CLI."""

from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .config import RunConfig
from .data import (AugmentPolicy, Batch, DatasetIndex, SplitPlan, augment_image,
                   batches, preview_grid, rescale, resize_bilinear, scan_dataset,
                   split)
from .kernels import (ConvGeometry, PoolContext, ShapeError, all_finite,
                      conv2d_backward, conv2d_forward, conv_output_shape,
                      maxpool2d_backward, maxpool2d_forward, pool_output_shape)
from .metrics import (ClassificationReport, ConfusionMatrix, RocCurve,
                      RunHistory, aggregate_runs, confusion, export_curves,
                      report, roc_auc)
from .model import (Model, ModelConfig, build_mpoxsldnet, count_parameters,
                    flatten_width, spatial_chain, summary_text)
from .optim import Adam, LossValue, bce_loss
from .synthetic import generate_synthetic_corpus
from .training import (TrainingAborted, evaluate_model, train_many,
                       train_single_run)

__version__ = "0.1.0"
