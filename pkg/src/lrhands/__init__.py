"""Left/right hand segmentation and identification for egocentric video."""

from .errors import DataError, FormatError, LRHandsError, StaleStateError
from .forest import Forest, ForestParams, predict_map, train_forest
from .geometry import (Contour, EllipseFeatures, EllipseFit, extract_contours,
                       extract_features, filter_contours, fit_ellipse)
from .identify import (DEFAULT_MODEL, HandLabel, LRModel, MaxwellParams,
                       assign_ids, fit_model, likelihood_ratio, likelihoods,
                       load_lr_model, maxwell_pdf, save_lr_model)
from .imaging import Frame, GlobalFeature, hsv_histogram, resample, rgb_to_lab
from .occlusion import LRState, is_occlusion, split_occlusion
from .pipeline import FrameResult, PipelineConfig, process_frame, process_video
from .pool import (IlluminationModel, ModelPool, build_pool, fuse, load_pool,
                   recommend, save_pool, segment)
from .superpixels import (Superpixel, SuperpixelSet, compute_superpixels,
                          superpixel_distance)

__version__ = "0.1.0"
