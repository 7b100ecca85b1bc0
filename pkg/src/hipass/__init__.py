"""Video deblurring with dynamically mixed high-pass kernels.

The core idea: instead of predicting filter kernels directly, predict
non-negative mixing weights over a fixed basis of zero-sum kernels. Any such
mixture blocks DC by construction, so the learned detail-extraction filters
are provably high-pass without constraining the optimizer.
"""

from .blursim import (BlurConfig, DatasetSample, SceneElement, SceneSpec,
                      accumulate_blur, build_dataset, build_sample,
                      make_random_scene, read_clip, read_dataset,
                      render_sharp_sequence, sample_from_scene, write_clip,
                      write_dataset)
from .errors import (DimensionError, DivergenceError, FormatError,
                     HipassError, PreconditionError)
from .flow import estimate_flow
from .kernels import (CoefficientVector, DynamicKernel, FrequencyResponse,
                      KernelBasis, combine, gram_schmidt, make_ablation_bases,
                      make_default_basis, mean_removal_projection,
                      random_high_pass, read_kernel_text, resolve_basis,
                      sample_response, verify_high_pass, write_kernel_text)
from .metrics import (SubbandReport, band_index_grid, psnr, spectrum_dump,
                      ssim, subband_mse)
from .model import (DeblurNet, ExtractionOutput, MacReport, ModelConfig,
                    build_variant, count_macs, load_checkpoint,
                    save_checkpoint)
from .pnm import read_pnm, write_frame, write_pgm, write_ppm
from .sharpen import (UnsharpConfig, get_named_kernel, gradient_features,
                      unsharp_mask, unsharp_mask_array)
from .tensorops import (Frame, VideoClip, bilinear_warp, conv2d,
                        conv3d_temporal, dft2d, idft2d, pixel_shuffle,
                        pixel_unshuffle, rotate90)
from .training import TrainingSchedule, TrainResult, augment_clip, train
from .vten import read_tensors, write_tensors

__version__ = "0.1.0"

__all__ = [
    "BlurConfig", "CoefficientVector", "DatasetSample", "DeblurNet",
    "DimensionError", "DivergenceError", "DynamicKernel", "ExtractionOutput",
    "FormatError", "Frame", "FrequencyResponse", "HipassError", "KernelBasis",
    "MacReport", "ModelConfig", "PreconditionError", "SceneElement",
    "SceneSpec", "SubbandReport", "TrainResult", "TrainingSchedule",
    "UnsharpConfig", "VideoClip", "accumulate_blur", "augment_clip",
    "band_index_grid", "bilinear_warp", "build_dataset", "build_sample",
    "build_variant", "combine", "conv2d", "conv3d_temporal", "count_macs",
    "dft2d", "estimate_flow", "get_named_kernel", "gradient_features",
    "gram_schmidt", "idft2d", "load_checkpoint", "make_ablation_bases",
    "make_default_basis", "make_random_scene", "mean_removal_projection",
    "pixel_shuffle", "pixel_unshuffle", "psnr", "random_high_pass",
    "read_clip", "read_dataset", "read_kernel_text", "read_pnm",
    "read_tensors", "render_sharp_sequence", "resolve_basis", "rotate90",
    "sample_from_scene", "sample_response", "save_checkpoint",
    "spectrum_dump", "ssim", "subband_mse", "train", "unsharp_mask",
    "unsharp_mask_array", "verify_high_pass", "write_clip", "write_dataset",
    "write_frame", "write_kernel_text", "write_pgm", "write_ppm",
    "write_tensors",
]
