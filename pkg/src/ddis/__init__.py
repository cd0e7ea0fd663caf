"""Template matching with nearest-neighbor-field similarity measures (DIS, DDIS, BBS)."""

from .ann import AnnIndex, AnnParams, PcaProjection, build_index, fit_pca, query
from .bench import (PairRecord, Rect, SyntheticParams, auc, gen_dataset, gen_synthetic, iou,
                    read_manifest, render_pair, run_bench, run_pair, success_curve, write_manifest)
from .errors import (BadMagicError, FormatError, HeaderError, InputError, SizeGuardError,
                     TruncatedError)
from .features import (FeatureGrid, PatchSpec, extract_patch_features, load_feature_map,
                       load_image, save_feature_map, save_image, standardize)
from .matcher import (MatcherConfig, MatchResult, NNGrid, baseline_map, bbs_map_naive,
                      compute_nn_grid, ddis_map, dis_map, localize, match_grids, match_images,
                      smooth)
from .measures import PointSet, bbs, ddis, dis, exact_nn, kappa, nn_field
from .statsim import (DeformationMode, GaussianSpec, dis_expectation_appendix,
                      estimate_expectation, expectation_grid, gaussian_cdf, sample_set)

__version__ = "0.1.0"
