#pragma once

#include "findtrack/backends.hpp"
#include "findtrack/core.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace findtrack {

// Uniformly spaced candidate key frames, 1-based:
//   j_i = floor((i - 1)(T - 1) / (N - 1)) + 1,  i = 1..N
// Repeated indices (N > T) are dropped in order. N = 1 yields the middle frame.
std::vector<int> sample_candidates(int num_frames, int num_candidates);

// Cosine similarity of two embeddings.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar alignment_score(const Eigen::MatrixBase<DerivedA>& image,
                                          const Eigen::MatrixBase<DerivedB>& text) {
    using Scalar = typename DerivedA::Scalar;
    if (image.size() != text.size()) {
        throw Error(ErrorCode::DimensionMismatch, "embedding sizes differ: " + std::to_string(image.size()) +
                                                      " vs " + std::to_string(text.size()));
    }
    const Scalar ni = image.norm();
    const Scalar nt = text.norm();
    if (!(ni > Scalar(0)) || !(nt > Scalar(0))) {
        throw Error(ErrorCode::ZeroNormEmbedding, "cannot align a zero-norm embedding");
    }
    const Scalar rho = image.dot(text.template cast<Scalar>()) / (ni * nt);
    return std::clamp(rho, Scalar(-1), Scalar(1));
}

// sigma = w1 * pi + w2 * clamp(rho, 0, 1)
template <typename Scalar>
Scalar mask_score(Scalar confidence, Scalar alignment, Scalar w1, Scalar w2) {
    return w1 * confidence + w2 * std::clamp(alignment, Scalar(0), Scalar(1));
}

struct CandidateRecord {
    ScoredMask scored;
    bool empty = false;
};

struct IdentificationResult {
    int key_frame = 0;
    BinaryMask key_mask;
    std::vector<CandidateRecord> candidates;  // ordered by frame index
};

// Argmax of score with ties to the lowest frame index. A winner with an empty mask
// yields to the best non-empty candidate; all-empty throws AllCandidatesEmpty.
IdentificationResult select_key_frame(std::vector<CandidateRecord> candidates);

// Samples candidates, segments and scores each, then selects the key frame.
// Candidates are evaluated concurrently when both backends are thread safe.
IdentificationResult identify_target(const VideoSequence& video, const PipelineConfig& config,
                                     SegmenterPort& segmenter, AlignerPort& aligner);

// Same as identify_target but on a caller-chosen candidate list.
std::vector<CandidateRecord> score_candidates(const VideoSequence& video, std::span<const int> indices,
                                              const PipelineConfig& config, SegmenterPort& segmenter,
                                              AlignerPort& aligner);

// {"key_frame":k,"candidates":[{"frame","confidence","alignment","score","empty"}...]}
nlohmann::ordered_json diagnostics_json(const IdentificationResult& result);

}  // namespace findtrack
