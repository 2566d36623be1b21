#include "ilpc/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ilpc {

namespace {

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}
void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), 8);
}
void write_i32(std::ostream& os, std::int32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::istream& is, const char* field) {
  std::uint32_t v;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw std::runtime_error(std::string("read failed at field ") + field);
  return v;
}
std::uint64_t read_u64(std::istream& is, const char* field) {
  std::uint64_t v;
  is.read(reinterpret_cast<char*>(&v), 8);
  if (!is) throw std::runtime_error(std::string("read failed at field ") + field);
  return v;
}
std::int32_t read_i32(std::istream& is, const char* field) {
  std::int32_t v;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw std::runtime_error(std::string("read failed at field ") + field);
  return v;
}

void write_tensor(std::ostream& os, const Tensor& t) {
  write_u64(os, t.rows());
  write_u64(os, t.cols());
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.size() * sizeof(double)));
}

Tensor read_tensor(std::istream& is, const char* field) {
  std::uint64_t rows = read_u64(is, field);
  std::uint64_t cols = read_u64(is, field);
  Tensor t(rows, cols);
  is.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!is) throw std::runtime_error(std::string("truncated tensor payload in ") + field);
  return t;
}

void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is, const char* field) {
  std::uint32_t n = read_u32(is, field);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw std::runtime_error(std::string("truncated string in ") + field);
  return s;
}

}  // namespace

AudioBuffer wav_read(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("wav_read: cannot open " + path);
  char tag[4];
  f.read(tag, 4);
  if (!f || std::memcmp(tag, "RIFF", 4) != 0)
    throw std::runtime_error("wav_read: missing RIFF tag in " + path);
  read_u32(f, "riff_size");
  f.read(tag, 4);
  if (!f || std::memcmp(tag, "WAVE", 4) != 0)
    throw std::runtime_error("wav_read: missing WAVE tag in " + path);

  AudioBuffer out;
  bool have_fmt = false;
  while (f.read(tag, 4)) {
    std::uint32_t chunk_size = read_u32(f, "chunk_size");
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      std::uint16_t format, channels, block_align, bits;
      std::uint32_t rate, byte_rate;
      f.read(reinterpret_cast<char*>(&format), 2);
      f.read(reinterpret_cast<char*>(&channels), 2);
      f.read(reinterpret_cast<char*>(&rate), 4);
      f.read(reinterpret_cast<char*>(&byte_rate), 4);
      f.read(reinterpret_cast<char*>(&block_align), 2);
      f.read(reinterpret_cast<char*>(&bits), 2);
      if (!f) throw std::runtime_error("wav_read: truncated fmt chunk");
      if (format != 1)
        throw std::runtime_error("wav_read: unsupported codec (audio_format=" +
                                 std::to_string(format) + "), PCM required");
      if (channels != 1)
        throw std::runtime_error("wav_read: unsupported channel count " +
                                 std::to_string(channels) + ", mono required");
      if (bits != 16)
        throw std::runtime_error("wav_read: unsupported bits_per_sample " +
                                 std::to_string(bits) + ", 16 required");
      out.sample_rate = static_cast<int>(rate);
      f.ignore(chunk_size > 16 ? chunk_size - 16 : 0);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw std::runtime_error("wav_read: data chunk before fmt chunk");
      const std::size_t n = chunk_size / 2;
      std::vector<std::int16_t> pcm(n);
      f.read(reinterpret_cast<char*>(pcm.data()), chunk_size);
      if (!f) throw std::runtime_error("wav_read: truncated data chunk");
      out.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i)
        out.samples[i] = std::max(-1.0, static_cast<double>(pcm[i]) / 32767.0);
      return out;
    } else {
      f.ignore(chunk_size + (chunk_size & 1));
    }
  }
  throw std::runtime_error("wav_read: no data chunk in " + path);
}

void wav_write(const std::string& path, const AudioBuffer& audio) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("wav_write: cannot open " + path);
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  f.write("RIFF", 4);
  write_u32(f, 36 + data_bytes);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  write_u32(f, 16);
  std::uint16_t format = 1, channels = 1, block_align = 2, bits = 16;
  std::uint32_t rate = static_cast<std::uint32_t>(audio.sample_rate);
  std::uint32_t byte_rate = rate * 2;
  f.write(reinterpret_cast<const char*>(&format), 2);
  f.write(reinterpret_cast<const char*>(&channels), 2);
  f.write(reinterpret_cast<const char*>(&rate), 4);
  f.write(reinterpret_cast<const char*>(&byte_rate), 4);
  f.write(reinterpret_cast<const char*>(&block_align), 2);
  f.write(reinterpret_cast<const char*>(&bits), 2);
  f.write("data", 4);
  write_u32(f, data_bytes);
  for (double x : audio.samples) {
    double v = std::clamp(x, -1.0, 1.0) * 32767.0;
    std::int16_t s = static_cast<std::int16_t>(std::lround(v));
    f.write(reinterpret_cast<const char*>(&s), 2);
  }
  if (!f) throw std::runtime_error("wav_write: write failed for " + path);
}

void feature_write(const std::string& path, const FeatureTrack& track, int sample_rate,
                   int frame_shift) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("feature_write: cannot open " + path);
  f.write("ILPC", 4);
  write_u32(f, 1);  // version
  write_u32(f, static_cast<std::uint32_t>(sample_rate));
  write_u32(f, static_cast<std::uint32_t>(frame_shift));
  write_u32(f, static_cast<std::uint32_t>(track.lp_order));
  write_u32(f, static_cast<std::uint32_t>(track.dim()));
  write_u32(f, static_cast<std::uint32_t>(track.frame_count));
  std::vector<float> payload(track.rows.begin(), track.rows.end());
  f.write(reinterpret_cast<const char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * 4));
  if (!f) throw std::runtime_error("feature_write: write failed for " + path);
}

FeatureTrack feature_read(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("feature_read: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "ILPC", 4) != 0)
    throw std::runtime_error("feature_read: bad magic in " + path);
  std::uint32_t version = read_u32(f, "version");
  if (version != 1)
    throw std::runtime_error("feature_read: unsupported version " + std::to_string(version));
  read_u32(f, "sample_rate");
  read_u32(f, "frame_shift");
  std::uint32_t lp_order = read_u32(f, "lp_order");
  std::uint32_t dim = read_u32(f, "feature_dim");
  std::uint32_t frames = read_u32(f, "frame_count");
  if (dim != lp_order + 3)
    throw std::runtime_error("feature_read: feature_dim " + std::to_string(dim) +
                             " inconsistent with lp_order " + std::to_string(lp_order));
  FeatureTrack track;
  track.frame_count = frames;
  track.lp_order = static_cast<int>(lp_order);
  std::vector<float> payload(static_cast<std::size_t>(frames) * dim);
  f.read(reinterpret_cast<char*>(payload.data()),
         static_cast<std::streamsize>(payload.size() * 4));
  if (!f)
    throw std::runtime_error("feature_read: payload shorter than frame_count*feature_dim in " +
                             path);
  track.rows.assign(payload.begin(), payload.end());
  // Rebuild the per-frame LP coefficients from the stored LSFs.
  track.lpc.resize(static_cast<std::size_t>(frames) * lp_order);
  for (std::size_t t = 0; t < frames; ++t) {
    std::vector<double> lsf(track.row(t) + 3, track.row(t) + 3 + lp_order);
    auto alphas = lsf_to_lpc(lsf);
    std::copy(alphas.begin(), alphas.end(), track.lpc.begin() + t * lp_order);
  }
  return track;
}

void save_checkpoint(const std::string& path, Model& model, Adam& adam,
                     std::uint64_t step, const Rng& rng) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
  f.write("ILPS", 4);
  write_u32(f, 1);  // version
  const ModelConfig& c = model.cfg;
  write_i32(f, c.feature_dim);
  write_i32(f, c.context_dim);
  write_i32(f, c.gru1_dim);
  write_i32(f, c.gru2_dim);
  write_i32(f, c.mixtures);
  write_i32(f, c.frame_shift);
  write_i32(f, c.lp_order);

  auto params = model.parameters();
  write_u32(f, static_cast<std::uint32_t>(params.size()));
  for (Param* p : params) {
    write_string(f, p->name);
    write_tensor(f, p->value);
  }
  write_u64(f, adam.step_count());
  write_u32(f, static_cast<std::uint32_t>(adam.first_moments().size()));
  for (std::size_t i = 0; i < adam.first_moments().size(); ++i) {
    write_tensor(f, adam.first_moments()[i]);
    write_tensor(f, adam.second_moments()[i]);
  }
  write_u64(f, step);
  std::ostringstream rs;
  rng.save(rs);
  write_string(f, rs.str());
  if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "ILPS", 4) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  std::uint32_t version = read_u32(f, "version");
  if (version != 1)
    throw std::runtime_error("load_checkpoint: unsupported version " +
                             std::to_string(version));
  ModelConfig c;
  c.feature_dim = read_i32(f, "feature_dim");
  c.context_dim = read_i32(f, "context_dim");
  c.gru1_dim = read_i32(f, "gru1_dim");
  c.gru2_dim = read_i32(f, "gru2_dim");
  c.mixtures = read_i32(f, "mixtures");
  c.frame_shift = read_i32(f, "frame_shift");
  c.lp_order = read_i32(f, "lp_order");

  LoadedCheckpoint out;
  Rng scratch(0);
  out.model = Model::create(c, scratch);
  auto params = out.model.parameters();
  std::uint32_t count = read_u32(f, "tensor_count");
  if (count != params.size())
    throw std::runtime_error("load_checkpoint: tensor_count " + std::to_string(count) +
                             " does not match model parameter count " +
                             std::to_string(params.size()));
  for (Param* p : params) {
    std::string name = read_string(f, "tensor_name");
    if (name != p->name)
      throw std::runtime_error("load_checkpoint: tensor name mismatch, expected " + p->name +
                               ", got " + name);
    Tensor t = read_tensor(f, name.c_str());
    if (!t.same_shape(p->value))
      throw std::runtime_error("load_checkpoint: shape mismatch for " + name);
    p->value = std::move(t);
  }
  out.adam.set_step_count(read_u64(f, "adam_step"));
  std::uint32_t slots = read_u32(f, "adam_slots");
  for (std::uint32_t i = 0; i < slots; ++i) {
    out.adam.first_moments().push_back(read_tensor(f, "adam_m"));
    out.adam.second_moments().push_back(read_tensor(f, "adam_v"));
  }
  out.step = read_u64(f, "step");
  std::istringstream rs(read_string(f, "rng_state"));
  out.rng.load(rs);
  return out;
}

void write_corpus_dir(const std::string& dir, const std::vector<CorpusItem>& items,
                      const FrameConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (std::size_t i = 0; i < items.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "utt_%04zu", i);
    wav_write((fs::path(dir) / (std::string(name) + ".wav")).string(), items[i].audio);
    feature_write((fs::path(dir) / (std::string(name) + ".feat")).string(),
                  items[i].features, items[i].audio.sample_rate, cfg.frame_shift);
  }
}

std::vector<CorpusItem> read_corpus_dir(const std::string& dir, const FrameConfig& cfg) {
  namespace fs = std::filesystem;
  std::vector<std::string> stems;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".wav") stems.push_back(e.path().stem().string());
  std::sort(stems.begin(), stems.end());
  std::vector<CorpusItem> items;
  for (const auto& stem : stems) {
    CorpusItem item;
    item.audio = wav_read((fs::path(dir) / (stem + ".wav")).string());
    fs::path feat = fs::path(dir) / (stem + ".feat");
    if (fs::exists(feat)) {
      item.features = feature_read(feat.string());
    } else {
      item.features = extract_features(item.audio, cfg);
    }
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace ilpc
