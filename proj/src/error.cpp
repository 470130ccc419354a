// Copyright 2026 The voxtag Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "voxtag/error.hpp"

namespace voxtag {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::UnsupportedEncoding: return "UnsupportedEncoding";
    case Errc::Io: return "Io";
    case Errc::InvalidF0: return "InvalidF0";
    case Errc::TooShort: return "TooShort";
    case Errc::AllUnvoiced: return "AllUnvoiced";
    case Errc::OutOfRangeFactor: return "OutOfRangeFactor";
    case Errc::ZeroSourceMedian: return "ZeroSourceMedian";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonScalarLoss: return "NonScalarLoss";
    case Errc::OutOfRangeStep: return "OutOfRangeStep";
    case Errc::EmptyPrefix: return "EmptyPrefix";
    case Errc::UnknownToken: return "UnknownToken";
    case Errc::MissingBos: return "MissingBos";
    case Errc::DegenerateFrequency: return "DegenerateFrequency";
    case Errc::InvalidDistribution: return "InvalidDistribution";
    case Errc::NonFinite: return "NonFinite";
    case Errc::DivergedLoss: return "DivergedLoss";
    case Errc::EmptyList: return "EmptyList";
    case Errc::SingleClassData: return "SingleClassData";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::MissingHypothesis: return "MissingHypothesis";
    case Errc::WrongMode: return "WrongMode";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::UnknownSubcommand: return "UnknownSubcommand";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::Precondition: return "Precondition";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

bool is_validation_error(Errc code) noexcept {
  switch (code) {
    case Errc::UnknownSubcommand:
    case Errc::ConfigInvalid:
    case Errc::InvalidArgument:
    case Errc::InvalidSpec:
    case Errc::InvalidF0:
    case Errc::OutOfRangeFactor:
    case Errc::OutOfRangeStep:
    case Errc::DegenerateFrequency:
    case Errc::Precondition:
    case Errc::WrongMode:
      return true;
    default:
      return false;
  }
}

}  // namespace voxtag
