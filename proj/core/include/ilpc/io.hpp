#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ilpc/dsp.hpp"
#include "ilpc/model.hpp"
#include "ilpc/optim.hpp"
#include "ilpc/rng.hpp"

namespace ilpc {

// 16-bit PCM mono RIFF/WAVE. Floats are scaled by 32767 with saturation on
// write; read-then-write is the identity at 16-bit resolution.
AudioBuffer wav_read(const std::string& path);
void wav_write(const std::string& path, const AudioBuffer& audio);

// "ILPC" feature file: 32-bit float payload, row-major.
void feature_write(const std::string& path, const FeatureTrack& track, int sample_rate,
                   int frame_shift);
FeatureTrack feature_read(const std::string& path);

// "ILPS" checkpoint: model config, named tensor table, optimizer moments,
// step counter, and rng state. Bit-exact round trip.
void save_checkpoint(const std::string& path, Model& model, Adam& adam,
                     std::uint64_t step, const Rng& rng);

struct LoadedCheckpoint {
  Model model;
  Adam adam;
  std::uint64_t step = 0;
  Rng rng;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

// One synthetic utterance with its extracted features.
struct CorpusItem {
  AudioBuffer audio;
  FeatureTrack features;
};

// Desk-scale corpus: sawtooth-excited, slowly varying all-pole utterances
// with voiced/unvoiced structure, peak-normalized to 0.5.
std::vector<CorpusItem> synth_corpus(std::size_t n_utterances, double duration_s,
                                     std::uint64_t seed, const FrameConfig& cfg);

// Paired <name>.wav / <name>.feat files under dir.
void write_corpus_dir(const std::string& dir, const std::vector<CorpusItem>& items,
                      const FrameConfig& cfg);
std::vector<CorpusItem> read_corpus_dir(const std::string& dir, const FrameConfig& cfg);

}  // namespace ilpc
