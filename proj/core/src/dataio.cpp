#include "trimodal/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "trimodal/errors.hpp"
#include "trimodal/rng.hpp"

namespace trimodal::dataio {

namespace fs = std::filesystem;

namespace {

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

void validate_geometry(const DatasetGeometry& g) {
  if (g.image_side % 8 != 0 || g.image_side == 0)
    throw GeometryError("image side must be a positive multiple of 8, got " +
                        std::to_string(g.image_side));
  if (g.channels != 3)
    throw GeometryError("image channels must be 3, got " +
                        std::to_string(g.channels));
  if (g.cognitive_T < 1 || g.biomarker_T < 1)
    throw GeometryError("sequence lengths must be >= 1");
  if (g.cognitive_features < 1 || g.biomarker_features < 1)
    throw GeometryError("sequence feature counts must be >= 1");
}

// synthetic fixture constants
constexpr double kCognitiveDecline[3] = {2.5, 3.0, 2.0};
constexpr double kBiomarkerBase[3] = {0.3, 0.2, 0.1};
constexpr double kBiomarkerAmp[3] = {0.6, 0.7, 0.5};

Tensor make_image(Rng& rng, double severity, const DatasetGeometry& g) {
  const std::size_t h = g.image_side, w = g.image_side;
  const std::size_t sq = h / 3;
  const std::size_t start_y = (h - sq) / 2, start_x = (w - sq) / 2;
  Tensor img({h, w, 3});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const bool in_square = y >= start_y && y < start_y + sq &&
                             x >= start_x && x < start_x + sq;
      const double v = in_square ? (1.0 - severity) + rng.normal(0.0, 0.1)
                                 : rng.normal(0.0, 0.1);
      for (std::size_t c = 0; c < 3; ++c) img[(y * w + x) * 3 + c] = v;
    }
  }
  return img;
}

Tensor make_cognitive(Rng& rng, double severity, const DatasetGeometry& g) {
  Tensor seq({g.cognitive_T, g.cognitive_features});
  for (std::size_t t = 0; t < g.cognitive_T; ++t) {
    for (std::size_t j = 0; j < g.cognitive_features; ++j) {
      const double decline = kCognitiveDecline[j % 3];
      const double visit = static_cast<double>(t + 1);
      seq[t * g.cognitive_features + j] =
          clip01((29.0 - decline * visit * severity + rng.normal(0.0, 0.8)) /
                 30.0);
    }
  }
  return seq;
}

Tensor make_biomarker(Rng& rng, double severity, const DatasetGeometry& g) {
  Tensor seq({g.biomarker_T, g.biomarker_features});
  for (std::size_t t = 0; t < g.biomarker_T; ++t) {
    for (std::size_t j = 0; j < g.biomarker_features; ++j) {
      const double draw = static_cast<double>(t + 1);
      seq[t * g.biomarker_features + j] =
          kBiomarkerBase[j % 3] +
          kBiomarkerAmp[j % 3] * severity * (1.0 - std::exp(-draw / 2.0)) +
          rng.normal(0.0, 0.05);
    }
  }
  return seq;
}

}  // namespace

TrimodalDataset generate_trimodal(std::uint64_t seed, std::size_t n_subjects,
                                  const DatasetGeometry& geometry,
                                  double ad_prevalence,
                                  double corruption_rate) {
  if (n_subjects < 4) throw DataError("need at least 4 subjects");
  if (ad_prevalence < 0.0 || ad_prevalence > 1.0)
    throw ParameterError("prevalence must lie in [0,1]");
  if (corruption_rate < 0.0 || corruption_rate >= 1.0)
    throw ParameterError("corruption rate must lie in [0,1)");
  validate_geometry(geometry);

  Rng rng(seed);
  const std::size_t n_ad = static_cast<std::size_t>(
      std::llround(ad_prevalence * static_cast<double>(n_subjects)));
  std::vector<int> labels(n_subjects, 0);
  std::fill(labels.begin(), labels.begin() + n_ad, 1);
  rng.shuffle(labels);

  TrimodalDataset ds;
  ds.geometry = geometry;
  ds.seed = seed;
  ds.provenance = "synthetic-trimodal-v1";
  ds.subjects.reserve(n_subjects);

  for (std::size_t i = 0; i < n_subjects; ++i) {
    SubjectRecord rec;
    {
      std::ostringstream id;
      id << 'S' << std::setfill('0') << std::setw(6) << (i + 1);
      rec.id = id.str();
    }
    rec.label = labels[i];
    const double severity =
        rec.label == 1 ? rng.uniform(0.5, 1.0) : rng.uniform(0.0, 0.3);

    // corrupted modality: regenerate from a label-independent severity
    auto effective = [&](std::size_t modality_idx) {
      rec.corrupted[modality_idx] = rng.uniform() < corruption_rate;
      return rec.corrupted[modality_idx] ? rng.uniform(0.0, 1.0) : severity;
    };
    rec.image = make_image(rng, effective(0), geometry);
    rec.cognitive = make_cognitive(rng, effective(1), geometry);
    rec.biomarker = make_biomarker(rng, effective(2), geometry);
    ds.subjects.push_back(std::move(rec));
  }
  return ds;
}

// --- PGM -----------------------------------------------------------------

void write_pgm(const fs::path& path, const Tensor& image) {
  if (image.rank() != 3)
    throw DimensionError("write_pgm expects [h,w,c], got " + image.shape_str());
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot open " + path.string() + " for writing");
  out << "P5\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> row(w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double v = clip01(image[(y * w + x) * c]);
      row[x] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(w));
  }
}

namespace {

int pgm_next_token(std::istream& in, std::string& tok) {
  tok.clear();
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {}
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return 0;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok.empty() ? -1 : 0;
}

}  // namespace

Tensor read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("missing file: " + path.string());
  std::string magic;
  if (pgm_next_token(in, magic) != 0 || magic != "P5")
    throw LoadError("bad magic in " + path.string() + " (expected P5, got '" +
                    magic + "')");
  std::string tok;
  std::size_t w = 0, h = 0, maxval = 0;
  for (std::size_t* field : {&w, &h, &maxval}) {
    if (pgm_next_token(in, tok) != 0)
      throw LoadError("truncated PGM header in " + path.string());
    try {
      *field = std::stoul(tok);
    } catch (const std::exception&) {
      throw LoadError("bad PGM header token '" + tok + "' in " +
                      path.string());
    }
  }
  if (maxval != 255)
    throw LoadError("PGM maxval must be 255, got " + std::to_string(maxval) +
                    " in " + path.string());
  std::vector<unsigned char> pixels(w * h);
  in.read(reinterpret_cast<char*>(pixels.data()),
          static_cast<std::streamsize>(pixels.size()));
  if (static_cast<std::size_t>(in.gcount()) != pixels.size())
    throw LoadError("truncated PGM payload in " + path.string());
  Tensor img({h, w, 3});
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double v = static_cast<double>(pixels[i]) / 255.0;
    img[i * 3] = img[i * 3 + 1] = img[i * 3 + 2] = v;
  }
  return img;
}

// --- CSV export / import -------------------------------------------------

namespace {

std::string format_value(double v) {
  std::ostringstream os;
  os << std::setprecision(9) << v;
  return os.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

void export_sequence_csv(const TrimodalDataset& ds, const fs::path& path,
                         bool cognitive) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot open " + path.string() + " for writing");
  const std::size_t k =
      cognitive ? ds.geometry.cognitive_features : ds.geometry.biomarker_features;
  out << "subject_id,t";
  for (std::size_t j = 1; j <= k; ++j) out << ",f" << j;
  out << ",label\n";
  for (const auto& rec : ds.subjects) {
    const auto& seq = cognitive ? rec.cognitive : rec.biomarker;
    if (!seq) continue;
    const std::size_t T = seq->dim(0);
    for (std::size_t t = 0; t < T; ++t) {
      out << rec.id << ',' << t;
      for (std::size_t j = 0; j < k; ++j)
        out << ',' << format_value((*seq)[t * k + j]);
      out << ',' << rec.label << '\n';
    }
  }
}

}  // namespace

void export_dataset(const TrimodalDataset& ds, const fs::path& workdir) {
  fs::create_directories(workdir / "images");
  std::ofstream manifest(workdir / "manifest.csv");
  if (!manifest)
    throw LoadError("cannot open manifest in " + workdir.string());
  manifest << "subject_id,image_path,label\n";
  for (const auto& rec : ds.subjects) {
    if (!rec.image) continue;
    const std::string rel = "images/" + rec.id + ".pgm";
    write_pgm(workdir / rel, *rec.image);
    manifest << rec.id << ',' << rel << ',' << rec.label << '\n';
  }
  export_sequence_csv(ds, workdir / "cognitive.csv", true);
  export_sequence_csv(ds, workdir / "biomarker.csv", false);
}

ImageDataset load_image_dataset(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw LoadError("missing manifest: " + manifest_path.string());
  std::string line;
  if (!std::getline(in, line) ||
      split_csv_line(line) !=
          std::vector<std::string>{"subject_id", "image_path", "label"})
    throw LoadError("manifest header must be subject_id,image_path,label");
  ImageDataset out;
  const fs::path base = manifest_path.parent_path();
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3)
      throw LoadError("manifest row " + std::to_string(row_no) +
                      ": expected 3 fields");
    const std::string& id = fields[0];
    Tensor img;
    try {
      img = read_pgm(base / fields[1]);
    } catch (const LoadError& e) {
      throw LoadError("manifest row " + std::to_string(row_no) + " (" + id +
                      "): " + e.what());
    }
    if (img.dim(0) != img.dim(1))
      throw LoadError("manifest row " + std::to_string(row_no) + " (" + id +
                      "): non-square image " + img.shape_str());
    if (fields[2] != "0" && fields[2] != "1")
      throw LoadError("manifest row " + std::to_string(row_no) + " (" + id +
                      "): label must be 0 or 1, got '" + fields[2] + "'");
    out.ids.push_back(id);
    out.images.push_back(std::move(img));
    out.labels.push_back(fields[2] == "1" ? 1 : 0);
  }
  return out;
}

SequenceDataset load_sequence_dataset(const fs::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw LoadError("missing file: " + csv_path.string());
  std::string line;
  if (!std::getline(in, line)) throw LoadError("empty CSV: " + csv_path.string());
  const auto header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "subject_id" || header[1] != "t" ||
      header.back() != "label")
    throw LoadError("sequence CSV header must be subject_id,t,f1..fk,label");
  const std::size_t k = header.size() - 3;
  for (std::size_t j = 0; j < k; ++j) {
    if (header[2 + j] != "f" + std::to_string(j + 1))
      throw LoadError("sequence CSV feature column " + std::to_string(j + 1) +
                      " must be named f" + std::to_string(j + 1));
  }

  struct Row {
    std::size_t t;
    std::vector<double> values;
  };
  std::vector<std::string> order;
  std::map<std::string, std::vector<Row>> rows;
  std::map<std::string, int> labels;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw LoadError("row " + std::to_string(row_no) + ": expected " +
                      std::to_string(header.size()) + " fields");
    const std::string& id = fields[0];
    Row row;
    try {
      row.t = std::stoul(fields[1]);
      for (std::size_t j = 0; j < k; ++j) {
        std::size_t used = 0;
        row.values.push_back(std::stod(fields[2 + j], &used));
        if (used != fields[2 + j].size()) throw std::invalid_argument(fields[2 + j]);
      }
    } catch (const std::exception&) {
      throw LoadError("subject " + id + " row " + std::to_string(row_no) +
                      ": non-numeric value");
    }
    if (fields.back() != "0" && fields.back() != "1")
      throw LoadError("subject " + id + " row " + std::to_string(row_no) +
                      ": label must be 0 or 1");
    const int label = fields.back() == "1" ? 1 : 0;
    auto [it, inserted] = labels.emplace(id, label);
    if (!inserted && it->second != label)
      throw LoadError("subject " + id + " row " + std::to_string(row_no) +
                      ": inconsistent label");
    if (rows.find(id) == rows.end()) order.push_back(id);
    rows[id].push_back(std::move(row));
  }

  SequenceDataset out;
  std::size_t expected_T = 0;
  for (const auto& id : order) {
    auto& subject_rows = rows[id];
    std::sort(subject_rows.begin(), subject_rows.end(),
              [](const Row& a, const Row& b) { return a.t < b.t; });
    const std::size_t T = subject_rows.size();
    for (std::size_t t = 0; t < T; ++t) {
      if (subject_rows[t].t != t)
        throw LoadError("subject " + id + ": ragged timesteps (expected 0.." +
                        std::to_string(T - 1) + ")");
    }
    if (expected_T == 0) {
      expected_T = T;
    } else if (T != expected_T) {
      throw LoadError("subject " + id + ": ragged timesteps (" +
                      std::to_string(T) + " vs " + std::to_string(expected_T) +
                      ")");
    }
    Tensor seq({T, k});
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < k; ++j)
        seq[t * k + j] = subject_rows[t].values[j];
    out.ids.push_back(id);
    out.sequences.push_back(std::move(seq));
    out.labels.push_back(labels[id]);
  }
  return out;
}

TrimodalDataset load_trimodal(const fs::path& workdir, std::uint64_t seed) {
  ImageDataset images = load_image_dataset(workdir / "manifest.csv");
  SequenceDataset cognitive = load_sequence_dataset(workdir / "cognitive.csv");
  SequenceDataset biomarker = load_sequence_dataset(workdir / "biomarker.csv");

  std::vector<std::string> order;
  std::map<std::string, SubjectRecord> by_id;
  auto slot = [&](const std::string& id, int label) -> SubjectRecord& {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      order.push_back(id);
      SubjectRecord rec;
      rec.id = id;
      rec.label = label;
      it = by_id.emplace(id, std::move(rec)).first;
    } else if (it->second.label != label) {
      throw LoadError("subject " + id + ": label differs between files");
    }
    return it->second;
  };
  for (std::size_t i = 0; i < images.ids.size(); ++i)
    slot(images.ids[i], images.labels[i]).image = std::move(images.images[i]);
  for (std::size_t i = 0; i < cognitive.ids.size(); ++i)
    slot(cognitive.ids[i], cognitive.labels[i]).cognitive =
        std::move(cognitive.sequences[i]);
  for (std::size_t i = 0; i < biomarker.ids.size(); ++i)
    slot(biomarker.ids[i], biomarker.labels[i]).biomarker =
        std::move(biomarker.sequences[i]);

  TrimodalDataset ds;
  ds.seed = seed;
  // path-independent so reports stay byte-identical across workdirs
  ds.provenance = "loaded-trimodal-v1";
  for (const auto& id : order) ds.subjects.push_back(std::move(by_id[id]));
  for (const auto& rec : ds.subjects) {
    if (rec.image) {
      ds.geometry.image_side = rec.image->dim(0);
      ds.geometry.channels = rec.image->dim(2);
    }
    if (rec.cognitive) {
      ds.geometry.cognitive_T = rec.cognitive->dim(0);
      ds.geometry.cognitive_features = rec.cognitive->dim(1);
    }
    if (rec.biomarker) {
      ds.geometry.biomarker_T = rec.biomarker->dim(0);
      ds.geometry.biomarker_features = rec.biomarker->dim(1);
    }
  }
  return ds;
}

// --- split ---------------------------------------------------------------

SplitIndices split_dataset(const TrimodalDataset& ds,
                           const std::array<double, 3>& ratios,
                           std::uint64_t seed) {
  double sum = 0.0;
  for (double r : ratios) {
    if (r <= 0.0) throw SplitError("split ratios must be positive");
    sum += r;
  }
  if (std::fabs(sum - 1.0) > 1e-9)
    throw SplitError("split ratios must sum to 1");

  const std::size_t n = ds.subjects.size();
  std::array<std::size_t, 3> quota{};
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    quota[s] = static_cast<std::size_t>(ratios[s] * static_cast<double>(n));
    assigned += quota[s];
  }
  for (std::size_t s = 0; assigned < n; s = (s + 1) % 3) {
    ++quota[s];
    ++assigned;
  }

  Rng rng(seed);
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < n; ++i)
    by_class[ds.subjects[i].label == 1 ? 1 : 0].push_back(i);

  SplitIndices out;
  std::vector<std::size_t>* splits[3] = {&out.train, &out.val, &out.test};
  std::vector<std::size_t> leftovers;
  for (auto& cls : by_class) {
    rng.shuffle(cls);
    std::size_t pos = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      const std::size_t count = static_cast<std::size_t>(
          ratios[s] * static_cast<double>(cls.size()));
      for (std::size_t i = 0; i < count && pos < cls.size(); ++i, ++pos)
        splits[s]->push_back(cls[pos]);
    }
    for (; pos < cls.size(); ++pos) leftovers.push_back(cls[pos]);
  }
  for (std::size_t idx : leftovers) {
    bool placed = false;
    for (std::size_t s = 0; s < 3 && !placed; ++s) {
      if (splits[s]->size() < quota[s]) {
        splits[s]->push_back(idx);
        placed = true;
      }
    }
    if (!placed) out.train.push_back(idx);
  }

  for (std::size_t s = 0; s < 3; ++s) {
    std::array<std::size_t, 2> counts{};
    for (std::size_t idx : *splits[s]) counts[ds.subjects[idx].label]++;
    if (counts[0] == 0 || counts[1] == 0)
      throw SplitError("split " + std::string(s == 0   ? "train"
                                              : s == 1 ? "val"
                                                       : "test") +
                       " lacks a class (dataset too small for the ratios)");
  }
  return out;
}

// --- normalization -------------------------------------------------------

NormalizationStats fit_normalization(const std::vector<Tensor>& samples) {
  if (samples.empty()) throw DataError("cannot fit stats on an empty split");
  const std::size_t c = samples[0].dim(samples[0].rank() - 1);
  NormalizationStats stats;
  stats.mean.assign(c, 0.0);
  stats.stddev.assign(c, 0.0);
  std::size_t rows = 0;
  for (const auto& s : samples) {
    if (s.dim(s.rank() - 1) != c)
      throw DimensionError("inconsistent feature axis in normalization fit");
    const std::size_t r = s.size() / c;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) stats.mean[j] += s[i * c + j];
    rows += r;
  }
  for (std::size_t j = 0; j < c; ++j) stats.mean[j] /= rows;
  for (const auto& s : samples) {
    const std::size_t r = s.size() / c;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        const double d = s[i * c + j] - stats.mean[j];
        stats.stddev[j] += d * d;
      }
  }
  for (std::size_t j = 0; j < c; ++j)
    stats.stddev[j] = std::max(std::sqrt(stats.stddev[j] / rows), 1e-8);
  return stats;
}

Tensor apply_normalization(const Tensor& x, const NormalizationStats& stats) {
  const std::size_t c = x.dim(x.rank() - 1);
  if (c != stats.mean.size())
    throw DimensionError("normalization stats size " +
                         std::to_string(stats.mean.size()) +
                         " != feature axis " + std::to_string(c));
  Tensor y = x;
  const std::size_t rows = x.size() / c;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < c; ++j)
      y[i * c + j] = (y[i * c + j] - stats.mean[j]) / stats.stddev[j];
  return y;
}

// --- checkpoints ---------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'T', 'M', 'F', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xFF));
  buf.push_back(static_cast<char>((v >> 8) & 0xFF));
}
void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_f32(std::string& buf, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(buf, bits);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw LoadError("truncated checkpoint payload");
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i)
      v |= static_cast<std::uint16_t>(static_cast<unsigned char>(buf[pos++]))
           << (8 * i);
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++]))
           << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++]))
           << (8 * i);
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

void put_tensor(std::string& buf, const std::string& name, const Tensor& t) {
  if (name.size() > 0xFFFF) throw LoadError("tensor name too long: " + name);
  put_u16(buf, static_cast<std::uint16_t>(name.size()));
  buf.append(name);
  if (t.rank() > 8) throw LoadError("tensor rank too large");
  buf.push_back(static_cast<char>(t.rank()));
  for (std::size_t d : t.shape()) put_u32(buf, static_cast<std::uint32_t>(d));
  for (std::size_t i = 0; i < t.size(); ++i)
    put_f32(buf, static_cast<float>(t[i]));
}

std::pair<std::string, Tensor> get_tensor(Reader& r) {
  const std::uint16_t name_len = r.u16();
  if (name_len > 1024) throw LoadError("tensor name overflow");
  std::string name = r.str(name_len);
  const std::uint8_t rank = r.u8();
  if (rank == 0 || rank > 8)
    throw LoadError("tensor rank overflow in '" + name + "'");
  std::vector<std::size_t> shape;
  std::size_t total = 1;
  for (std::uint8_t d = 0; d < rank; ++d) {
    const std::uint32_t dim = r.u32();
    if (dim == 0 || dim > (1u << 28) || total > (1ull << 32) / std::max<std::size_t>(dim, 1))
      throw LoadError("tensor dimension overflow in '" + name + "'");
    shape.push_back(dim);
    total *= dim;
  }
  Tensor t(shape);
  for (std::size_t i = 0; i < total; ++i) t[i] = static_cast<double>(r.f32());
  return {std::move(name), std::move(t)};
}

}  // namespace

void save_checkpoint(nn::Model& model, const NormalizationStats& stats,
                     std::uint64_t training_seed, const fs::path& path) {
  std::string buf;
  buf.append(kMagic, 4);
  put_u32(buf, kVersion);
  buf.push_back(static_cast<char>(model.modality()));
  for (std::uint32_t g : model.geometry()) put_u32(buf, g);
  put_u64(buf, training_seed);

  auto named = model.named_parameters();
  put_u32(buf, static_cast<std::uint32_t>(named.size()));
  for (auto& [name, param] : named) put_tensor(buf, name, param->value);

  const std::size_t c = stats.mean.size();
  Tensor mean({std::max<std::size_t>(c, 1)});
  Tensor stddev({std::max<std::size_t>(c, 1)});
  for (std::size_t i = 0; i < c; ++i) {
    mean[i] = stats.mean[i];
    stddev[i] = stats.stddev[i];
  }
  put_u32(buf, 3);
  put_tensor(buf, "mean", mean);
  put_tensor(buf, "std", stddev);
  put_tensor(buf, "fitted_on_train",
             Tensor::scalar(stats.fitted_on == "train" ? 1.0 : 0.0));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot open " + path.string() + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

LoadedCheckpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("missing checkpoint: " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  Reader r{buf};
  if (r.str(4) != std::string(kMagic, 4))
    throw LoadError("bad magic in " + path.string());
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw LoadError("unknown checkpoint version " + std::to_string(version));
  const std::uint8_t tag = r.u8();
  if (tag > 2) throw LoadError("unknown modality tag " + std::to_string(tag));
  nn::Geometry6 geom{};
  for (auto& g : geom) g = r.u32();
  const std::uint64_t seed = r.u64();

  auto build = [&]() -> nn::Model {
    switch (static_cast<ModalityKind>(tag)) {
      case ModalityKind::image:
        return build_mri_cnn(geom[0], geom[2], 0);
      case ModalityKind::cognitive:
        return build_cognitive_lstm(geom[3], geom[4], 0);
      case ModalityKind::biomarker:
        return build_biomarker_lstm(geom[3], geom[4], 0);
    }
    throw LoadError("unknown modality tag");
  };
  LoadedCheckpoint out{build(), NormalizationStats{}, seed};

  std::map<std::string, nn::Param*> params;
  for (auto& [name, param] : out.model.named_parameters()) params[name] = param;
  const std::uint32_t tensor_count = r.u32();
  if (tensor_count != params.size())
    throw LoadError("checkpoint stores " + std::to_string(tensor_count) +
                    " tensors, model expects " + std::to_string(params.size()));
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    auto [name, tensor] = get_tensor(r);
    auto it = params.find(name);
    if (it == params.end())
      throw LoadError("unknown parameter tensor '" + name + "'");
    if (!tensor.same_shape(it->second->value))
      throw LoadError("parameter '" + name + "' shape " + tensor.shape_str() +
                      " != expected " + it->second->value.shape_str());
    it->second->value = std::move(tensor);
  }

  const std::uint32_t stats_count = r.u32();
  for (std::uint32_t i = 0; i < stats_count; ++i) {
    auto [name, tensor] = get_tensor(r);
    if (name == "mean") {
      out.stats.mean.assign(tensor.data(), tensor.data() + tensor.size());
    } else if (name == "std") {
      out.stats.stddev.assign(tensor.data(), tensor.data() + tensor.size());
    } else if (name == "fitted_on_train") {
      out.stats.fitted_on = tensor[0] != 0.0 ? "train" : "unknown";
    } else {
      throw LoadError("unknown stats tensor '" + name + "'");
    }
  }
  return out;
}

}  // namespace trimodal::dataio
