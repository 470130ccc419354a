# Copyright 2026 The voxtag Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Python bindings for the voxtag C++ core."""

from voxtag._core import (
    VoxtagError,
    apply_opposite,
    compute_alpha,
    compute_class_weights,
    corpus_bleu,
    envelope_peak_hz,
    evaluate,
    f0_contour,
    gender_accuracy,
    generate_corpus,
    lambda_at,
    logmel_features,
    noam_lr,
    pitch_formant_shift,
    read_wav,
    synth_harmonic,
    voiced_median,
    write_wav,
)

__all__ = [
    "VoxtagError",
    "apply_opposite",
    "compute_alpha",
    "compute_class_weights",
    "corpus_bleu",
    "envelope_peak_hz",
    "evaluate",
    "f0_contour",
    "gender_accuracy",
    "generate_corpus",
    "lambda_at",
    "logmel_features",
    "noam_lr",
    "pitch_formant_shift",
    "read_wav",
    "synth_harmonic",
    "voiced_median",
    "write_wav",
]
