// Copyright 2026 The kws Authors.
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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kws {

enum class ErrorCode {
  // wav_io
  MalformedHeader,
  UnsupportedFormat,
  TruncatedData,
  EmptyClip,
  // dsp
  LengthTooSmall,
  NonPowerOfTwoLength,
  SignalTooShort,
  NonPositiveRef,
  NegativeFrequency,
  NegativeMel,
  InvalidRange,
  InvalidOutputCount,
  InvalidConfig,
  // augment
  NonPositiveRate,
  ShiftTooLarge,
  NoiseTooShort,
  // dataset
  EmptyCorpus,
  UnreadableFile,
  UnparseableFilename,
  MissingSpeakerId,
  BatchNotMultipleOf12,
  ClassEmpty,
  // nn
  ShapeMismatch,
  MissingForwardCache,
  BatchTooSmall,
  IndivisibleLength,
  InvalidRate,
  DivergedLoss,
  // eval
  EmptyEnsemble,
  IndexOutOfRange,
  // io / cli
  IoError,
  ParseError,
  MismatchedPredictionFiles,
};

constexpr std::string_view code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::TruncatedData: return "TruncatedData";
    case ErrorCode::EmptyClip: return "EmptyClip";
    case ErrorCode::LengthTooSmall: return "LengthTooSmall";
    case ErrorCode::NonPowerOfTwoLength: return "NonPowerOfTwoLength";
    case ErrorCode::SignalTooShort: return "SignalTooShort";
    case ErrorCode::NonPositiveRef: return "NonPositiveRef";
    case ErrorCode::NegativeFrequency: return "NegativeFrequency";
    case ErrorCode::NegativeMel: return "NegativeMel";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::InvalidOutputCount: return "InvalidOutputCount";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NonPositiveRate: return "NonPositiveRate";
    case ErrorCode::ShiftTooLarge: return "ShiftTooLarge";
    case ErrorCode::NoiseTooShort: return "NoiseTooShort";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::UnreadableFile: return "UnreadableFile";
    case ErrorCode::UnparseableFilename: return "UnparseableFilename";
    case ErrorCode::MissingSpeakerId: return "MissingSpeakerId";
    case ErrorCode::BatchNotMultipleOf12: return "BatchNotMultipleOf12";
    case ErrorCode::ClassEmpty: return "ClassEmpty";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MissingForwardCache: return "MissingForwardCache";
    case ErrorCode::BatchTooSmall: return "BatchTooSmall";
    case ErrorCode::IndivisibleLength: return "IndivisibleLength";
    case ErrorCode::InvalidRate: return "InvalidRate";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::EmptyEnsemble: return "EmptyEnsemble";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MismatchedPredictionFiles: return "MismatchedPredictionFiles";
  }
  return "Unknown";
}

// Every failure in the toolkit is reported as an Error carrying a stable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace kws
