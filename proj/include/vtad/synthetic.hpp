// include/vtad/synthetic.hpp

// Copyright 2025  vTAD Toolkit Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Desk-scale synthetic corpus: seeded speaker profiles with known attribute
// intensities, an annotation set derived from those intensities, and the
// matching embeddings. Ground truth is analytic, so end-to-end behaviour of
// the full pipeline is checkable without audio or pretrained models.

#ifndef VTAD_SYNTHETIC_HPP_
#define VTAD_SYNTHETIC_HPP_

#include <cstdint>

#include "vtad/corpus.hpp"
#include "vtad/encoders.hpp"

namespace vtad {

struct SyntheticCorpusConfig {
  size_t speakers_per_gender = 50;
  size_t utterances_per_speaker = 26;
  size_t dim = 64;
  double noise_scale = 0.05;
  // An ordered pair (A, B) is annotated with descriptor v iff
  // intensity_B(v) - intensity_A(v) >= margin; the top three differences win
  // when more than three qualify.
  double margin = 0.3;
  uint64_t seed = 1;
};

struct SyntheticCorpus {
  AnnotationSet annotations;  // includes the inventory and vocabulary
  SyntheticProfileSet profiles;
  EmbeddingTable embeddings;
};

SyntheticCorpus build_synthetic_corpus(const DescriptorVocabulary& vocabulary,
                                       const SyntheticCorpusConfig& config);

}  // namespace vtad

#endif  // VTAD_SYNTHETIC_HPP_
