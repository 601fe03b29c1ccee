from .config import ModelConfig
from .features import (corr_features_per_bin, corr_matrix, flatten_corr,
                       attentive_corr_features, corr_feature_dim)
from .aec import (apply_crf, apply_crf_reference, stack_outputs, unstack_outputs,
                  ft_gru, estimate_crfs, aec_forward)
from .beamformer import (estimate_speech_noise, covariance, predict_weights,
                         dtd_scale, apply_beamformer, beamformer_forward)
from .network import (build_params, model_forward, enhance, enhance_to_tensor,
                      istft_tensor, stft_config, spectra_to_tensors)
