#include "findtrack/identify.hpp"

#include <future>

namespace findtrack {

std::vector<int> sample_candidates(int num_frames, int num_candidates) {
    if (num_frames < 1) throw Error(ErrorCode::InvalidArgument, "video must have at least one frame");
    if (num_candidates < 1) throw Error(ErrorCode::InvalidArgument, "need at least one candidate");
    if (num_candidates == 1) return {(num_frames + 1) / 2};
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(num_candidates));
    const std::int64_t span = num_frames - 1;
    const std::int64_t steps = num_candidates - 1;
    for (std::int64_t i = 1; i <= num_candidates; ++i) {
        const int j = static_cast<int>((i - 1) * span / steps) + 1;
        // the sequence is non-decreasing, so duplicates are adjacent
        if (out.empty() || out.back() != j) out.push_back(j);
    }
    return out;
}

IdentificationResult select_key_frame(std::vector<CandidateRecord> candidates) {
    if (candidates.empty()) throw Error(ErrorCode::InvalidArgument, "no candidates to select from");
    std::sort(candidates.begin(), candidates.end(),
              [](const auto& a, const auto& b) { return a.scored.frame_index < b.scored.frame_index; });
    const CandidateRecord* best = nullptr;
    for (const auto& c : candidates) {
        if (c.empty) continue;
        if (best == nullptr || c.scored.score > best->scored.score) best = &c;
    }
    if (best == nullptr) throw Error(ErrorCode::AllCandidatesEmpty, "every candidate mask is empty");
    IdentificationResult result;
    result.key_frame = best->scored.frame_index;
    result.key_mask = best->scored.mask;
    result.candidates = std::move(candidates);
    return result;
}

std::vector<CandidateRecord> score_candidates(const VideoSequence& video, std::span<const int> indices,
                                              const PipelineConfig& config, SegmenterPort& segmenter,
                                              AlignerPort& aligner) {
    config.validate();
    const auto& text = video.expression();
    const Embedding text_embedding = aligner.embed_text(text);

    const auto evaluate = [&](int j) {
        try {
            const auto& frame = video.frame(j);
            auto seg = segmenter.segment(frame, text);
            require_matches(seg.mask, frame, "segmenter output");
            CandidateRecord rec;
            rec.scored.frame_index = j;
            rec.scored.confidence = seg.confidence;
            rec.empty = seg.mask.empty();
            rec.scored.alignment =
                rec.empty ? 0.0 : alignment_score(aligner.embed_masked_image(frame, seg.mask), text_embedding);
            rec.scored.score = mask_score(rec.scored.confidence, rec.scored.alignment, config.w1, config.w2);
            rec.scored.mask = std::move(seg.mask);
            return rec;
        } catch (const Error& e) {
            throw Error(e.code(), "frame " + std::to_string(j) + ": " + e.what());
        }
    };

    std::vector<CandidateRecord> records;
    records.reserve(indices.size());
    if (segmenter.thread_safe() && aligner.thread_safe() && indices.size() > 1) {
        std::vector<std::future<CandidateRecord>> pending;
        for (int j : indices) pending.push_back(std::async(std::launch::async, evaluate, j));
        for (auto& f : pending) records.push_back(f.get());
    } else {
        for (int j : indices) records.push_back(evaluate(j));
    }
    std::sort(records.begin(), records.end(),
              [](const auto& a, const auto& b) { return a.scored.frame_index < b.scored.frame_index; });
    return records;
}

IdentificationResult identify_target(const VideoSequence& video, const PipelineConfig& config,
                                     SegmenterPort& segmenter, AlignerPort& aligner) {
    const auto indices = sample_candidates(video.length(), config.num_candidates);
    return select_key_frame(score_candidates(video, indices, config, segmenter, aligner));
}

nlohmann::ordered_json diagnostics_json(const IdentificationResult& result) {
    nlohmann::ordered_json doc;
    doc["key_frame"] = result.key_frame;
    doc["candidates"] = nlohmann::ordered_json::array();
    for (const auto& c : result.candidates) {
        nlohmann::ordered_json rec;
        rec["frame"] = c.scored.frame_index;
        rec["confidence"] = c.scored.confidence;
        rec["alignment"] = c.scored.alignment;
        rec["score"] = c.scored.score;
        rec["empty"] = c.empty;
        doc["candidates"].push_back(std::move(rec));
    }
    return doc;
}

}  // namespace findtrack
