from .room import (RoomSpec, RirSet, linear_array, generate_rir, measure_rt60,
                   eyring_reflection)
from .signals import apply_nonlinearity, synth_utterance, synth_noise, NONLINEARITIES
from .mix import (SceneSpec, SceneAudio, mix_scene, active_mask, frame_energies,
                  encode_activity, decode_activity, ACTIVITY_THRESH_DB, HOP)
from .dataset import (DEFAULT_CONFIG, sample_room, sample_scene, render_scene,
                      build_dataset, load_manifest)
