#include "xcos/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "xcos/image_io.hpp"

namespace xcos {

using detail::check;

std::vector<int> Dataset::indices_of(int identity) const {
  std::vector<int> out;
  for (size_t i = 0; i < images.size(); ++i) {
    if (images[i].identity_id == identity) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> Dataset::all_indices() const {
  std::vector<int> out(images.size());
  std::iota(out.begin(), out.end(), 0);
  return out;
}

Tensor normalize(const ImageRecord& img) {
  check(img.pixels.size() == img.pixel_count(),
        "image pixel buffer does not match its dimensions");
  const int h = img.height, w = img.width;
  Tensor out({3, h, w});
  double* o = out.data();
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const uint8_t v = img.pixels[(static_cast<size_t>(y) * w + x) * 3 + c];
        o[(static_cast<size_t>(c) * h + y) * w + x] = (static_cast<double>(v) - 127.5) / 128.0;
      }
    }
  }
  return out;
}

ImageRecord denormalize(const Tensor& img, int identity_id) {
  check(img.rank() == 3 && img.extent(0) == 3,
        "denormalize expects a (3, H, W) tensor, got " + img.shape_str());
  const int h = img.extent(1), w = img.extent(2);
  ImageRecord out;
  out.identity_id = identity_id;
  out.height = h;
  out.width = w;
  out.pixels.resize(out.pixel_count());
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double v = img[(c * h + y) * w + x] * 128.0 + 127.5;
        const long r = std::lround(v);
        check(r >= 0 && r <= 255 && std::fabs(v - static_cast<double>(r)) < 1e-9,
              "denormalize value " + std::to_string(v) + " is not an 8-bit channel value");
        out.pixels[(static_cast<size_t>(y) * w + x) * 3 + c] = static_cast<uint8_t>(r);
      }
    }
  }
  return out;
}

Tensor hflip(const Tensor& img) {
  check(img.rank() == 3, "hflip expects a (C, H, W) tensor, got " + img.shape_str());
  const int c = img.extent(0), h = img.extent(1), w = img.extent(2);
  Tensor out = img;
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y) {
      double* row = out.data() + (static_cast<size_t>(ch) * h + y) * w;
      std::reverse(row, row + w);
    }
  }
  return out;
}

Tensor random_hflip(const Tensor& img, Rng& rng) {
  return rng.next_bool() ? hflip(img) : img;
}

void SynthConfig::validate() const {
  check(identities >= 2, "synthetic dataset needs at least 2 identities");
  check(images_per_identity >= 2, "synthetic dataset needs at least 2 images per identity");
  check(height >= 8 && width >= 8, "synthetic image size too small");
  check(intra_class_noise >= 0.0, "intra_class_noise must be nonnegative");
  check(max_translation >= 0, "max_translation must be nonnegative");
}

namespace {

// Smooth per-channel field: a few random sinusoids over the image plane.
struct FieldSpec {
  double amp, fx, fy, phase;
};

std::vector<FieldSpec> random_field(Rng& rng) {
  std::vector<FieldSpec> waves(4);
  for (FieldSpec& s : waves) {
    s.amp = rng.next_real(10.0, 30.0);
    s.fx = rng.next_real(0.5, 3.0);
    s.fy = rng.next_real(0.5, 3.0);
    s.phase = rng.next_real(0.0, 6.283185307179586);
  }
  return waves;
}

struct Blob {
  double cx, cy, rx, ry, angle;
  double delta[3];
};

// Identity base pattern: mid-gray plus smooth fields plus geometric blobs.
std::vector<double> identity_pattern(int h, int w, Rng& rng) {
  std::vector<double> base(static_cast<size_t>(h) * w * 3, 128.0);

  for (int c = 0; c < 3; ++c) {
    const auto waves = random_field(rng);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double v = 0.0;
        for (const FieldSpec& s : waves) {
          v += s.amp * std::sin(6.283185307179586 * (s.fx * x / w + s.fy * y / h) + s.phase);
        }
        base[(static_cast<size_t>(y) * w + x) * 3 + c] += v;
      }
    }
  }

  const int blob_count = rng.next_int(4, 6);
  for (int bi = 0; bi < blob_count; ++bi) {
    Blob b;
    b.cx = rng.next_real(0.2 * w, 0.8 * w);
    b.cy = rng.next_real(0.2 * h, 0.8 * h);
    b.rx = rng.next_real(0.08 * w, 0.3 * w);
    b.ry = rng.next_real(0.08 * h, 0.3 * h);
    b.angle = rng.next_real(0.0, 3.141592653589793);
    for (double& d : b.delta) d = rng.next_real(-90.0, 90.0);
    const double ca = std::cos(b.angle), sa = std::sin(b.angle);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double dx = x - b.cx, dy = y - b.cy;
        const double u = (dx * ca + dy * sa) / b.rx;
        const double v = (-dx * sa + dy * ca) / b.ry;
        if (u * u + v * v <= 1.0) {
          for (int c = 0; c < 3; ++c) {
            base[(static_cast<size_t>(y) * w + x) * 3 + c] += b.delta[c];
          }
        }
      }
    }
  }
  return base;
}

uint8_t clamp_pixel(double v) {
  return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

}  // namespace

Dataset synth_identities(const SynthConfig& cfg) {
  cfg.validate();
  Rng master(cfg.rng_seed);
  Dataset data;
  data.num_identities = cfg.identities;
  data.images.reserve(static_cast<size_t>(cfg.identities) * cfg.images_per_identity);

  const int h = cfg.height, w = cfg.width;
  for (int id = 0; id < cfg.identities; ++id) {
    Rng id_rng = master.fork(static_cast<uint64_t>(id) + 1);
    const std::vector<double> base = identity_pattern(h, w, id_rng);
    for (int img = 0; img < cfg.images_per_identity; ++img) {
      Rng img_rng = id_rng.fork(static_cast<uint64_t>(img) + 1);
      int dx = 0, dy = 0;
      if (cfg.max_translation > 0) {
        dx = img_rng.next_int(-cfg.max_translation, cfg.max_translation);
        dy = img_rng.next_int(-cfg.max_translation, cfg.max_translation);
      }
      ImageRecord rec;
      rec.identity_id = id;
      rec.height = h;
      rec.width = w;
      rec.pixels.resize(rec.pixel_count());
      const double sigma = cfg.intra_class_noise * 255.0;
      for (int y = 0; y < h; ++y) {
        const int sy = std::clamp(y - dy, 0, h - 1);
        for (int x = 0; x < w; ++x) {
          const int sx = std::clamp(x - dx, 0, w - 1);
          for (int c = 0; c < 3; ++c) {
            double v = base[(static_cast<size_t>(sy) * w + sx) * 3 + c];
            if (sigma > 0.0) v += sigma * img_rng.next_gaussian();
            rec.pixels[(static_cast<size_t>(y) * w + x) * 3 + c] = clamp_pixel(v);
          }
        }
      }
      data.images.push_back(std::move(rec));
    }
  }
  return data;
}

namespace {

int64_t pairs_of(int64_t n) { return n * (n - 1) / 2; }

struct PairPool {
  std::vector<std::pair<int, int>> items;
};

}  // namespace

std::vector<PairRecord> sample_pairs(const Dataset& data, const std::vector<int>& subset,
                                     int n_pos, int n_neg, Rng& rng) {
  check(n_pos >= 0 && n_neg >= 0, "pair counts must be nonnegative");
  for (int idx : subset) {
    check(idx >= 0 && idx < static_cast<int>(data.images.size()),
          "subset index " + std::to_string(idx) + " out of dataset range");
  }

  std::vector<std::vector<int>> by_identity;
  for (int idx : subset) {
    const int id = data.images[static_cast<size_t>(idx)].identity_id;
    if (id >= static_cast<int>(by_identity.size())) by_identity.resize(id + 1);
    by_identity[static_cast<size_t>(id)].push_back(idx);
  }

  const int64_t m = static_cast<int64_t>(subset.size());
  int64_t max_pos = 0;
  for (const auto& group : by_identity) max_pos += pairs_of(static_cast<int64_t>(group.size()));
  const int64_t max_neg = pairs_of(m) - max_pos;
  check(n_pos <= max_pos && n_neg <= max_neg,
        "requested " + std::to_string(n_pos) + " positive and " + std::to_string(n_neg) +
            " negative pairs but only " + std::to_string(max_pos) + " positive and " +
            std::to_string(max_neg) + " negative are available");

  auto shuffled_prefix = [&rng](std::vector<std::pair<int, int>>& pool, int count) {
    // Fisher-Yates over the first `count` positions.
    const int64_t n = static_cast<int64_t>(pool.size());
    for (int64_t i = 0; i < count; ++i) {
      const int64_t j = i + static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(n - i)));
      std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
    }
    pool.resize(static_cast<size_t>(count));
  };

  std::vector<PairRecord> out;
  out.reserve(static_cast<size_t>(n_pos) + n_neg);

  auto draw = [&](bool positive, int wanted, int64_t available) {
    if (wanted == 0) return;
    if (wanted * 4 >= available) {
      // Dense request: enumerate, shuffle, take a prefix.
      std::vector<std::pair<int, int>> pool;
      pool.reserve(static_cast<size_t>(available));
      for (size_t i = 0; i < subset.size(); ++i) {
        for (size_t j = i + 1; j < subset.size(); ++j) {
          const int a = subset[i], b = subset[j];
          const bool same =
              data.images[static_cast<size_t>(a)].identity_id ==
              data.images[static_cast<size_t>(b)].identity_id;
          if (same == positive) pool.emplace_back(a, b);
        }
      }
      shuffled_prefix(pool, wanted);
      for (auto [a, b] : pool) out.push_back({a, b, positive});
    } else {
      // Sparse request: rejection-sample distinct unordered pairs.
      std::set<std::pair<int, int>> used;
      while (static_cast<int>(used.size()) < wanted) {
        const int i = static_cast<int>(rng.next_below(subset.size()));
        const int j = static_cast<int>(rng.next_below(subset.size()));
        if (i == j) continue;
        const int a = std::min(subset[i], subset[j]);
        const int b = std::max(subset[i], subset[j]);
        if (a == b) continue;
        const bool same = data.images[static_cast<size_t>(a)].identity_id ==
                          data.images[static_cast<size_t>(b)].identity_id;
        if (same != positive) continue;
        if (!used.emplace(a, b).second) continue;
        out.push_back({a, b, positive});
      }
    }
  };

  draw(true, n_pos, max_pos);
  draw(false, n_neg, max_neg);
  return out;
}

std::vector<PairRecord> sample_pairs(const Dataset& data, int n_pos, int n_neg, Rng& rng) {
  return sample_pairs(data, data.all_indices(), n_pos, n_neg, rng);
}

double OcclusionMask::coverage() const {
  if (cells.empty()) return 0.0;
  size_t on = 0;
  for (uint8_t c : cells) on += c != 0;
  return static_cast<double>(on) / static_cast<double>(cells.size());
}

OcclusionMask free_form_mask(int height, int width, double coverage, Rng& rng) {
  check(height >= 1 && width >= 1, "mask dimensions must be positive");
  check(coverage >= 0.0 && coverage <= 1.0, "coverage must be in [0, 1]");

  OcclusionMask mask;
  mask.height = height;
  mask.width = width;
  mask.cells.assign(static_cast<size_t>(height) * width, 0);

  const int64_t total = static_cast<int64_t>(height) * width;
  const int64_t target = std::llround(coverage * static_cast<double>(total));
  if (coverage >= 1.0) {
    std::fill(mask.cells.begin(), mask.cells.end(), 1);
    return mask;
  }
  if (target <= 0) return mask;

  int64_t painted = 0;
  auto stamp = [&](double cx, double cy, int radius) {
    for (int dy = -radius; dy <= radius && painted < target; ++dy) {
      const int y = static_cast<int>(std::lround(cy)) + dy;
      if (y < 0 || y >= height) continue;
      for (int dx = -radius; dx <= radius && painted < target; ++dx) {
        const int x = static_cast<int>(std::lround(cx)) + dx;
        if (x < 0 || x >= width) continue;
        if (dx * dx + dy * dy > radius * radius) continue;
        uint8_t& cell = mask.cells[static_cast<size_t>(y) * width + x];
        if (!cell) {
          cell = 1;
          ++painted;
        }
      }
    }
  };

  while (painted < target) {
    // One brush stroke: random start, wandering direction, radius 3-8 px.
    double x = rng.next_real(0.0, static_cast<double>(width));
    double y = rng.next_real(0.0, static_cast<double>(height));
    const int radius = rng.next_int(3, 8);
    double theta = rng.next_real(0.0, 6.283185307179586);
    const int steps = rng.next_int(8, 40);
    for (int s = 0; s < steps && painted < target; ++s) {
      stamp(x, y, radius);
      theta += rng.next_real(-0.6, 0.6);
      x = std::clamp(x + std::cos(theta) * radius, 0.0, static_cast<double>(width - 1));
      y = std::clamp(y + std::sin(theta) * radius, 0.0, static_cast<double>(height - 1));
    }
  }
  return mask;
}

Tensor apply_mask(const Tensor& img, const OcclusionMask& mask, double fill) {
  check(img.rank() == 3, "apply_mask expects a (C, H, W) tensor, got " + img.shape_str());
  const int c = img.extent(0), h = img.extent(1), w = img.extent(2);
  check(h == mask.height && w == mask.width,
        "mask size (" + std::to_string(mask.height) + ", " + std::to_string(mask.width) +
            ") does not match image " + img.shape_str());
  Tensor out = img;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(y, x)) continue;
      for (int ch = 0; ch < c; ++ch) {
        out[(ch * h + y) * w + x] = fill;
      }
    }
  }
  return out;
}

std::vector<LoadedPair> load_pair_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  check(in.good(), "cannot open pair list " + path.string());
  const std::filesystem::path base = path.has_parent_path() ? path.parent_path() : ".";

  std::vector<LoadedPair> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const size_t t1 = line.find('\t');
    const size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    check(t1 != std::string::npos && t2 != std::string::npos,
          "pair list line " + std::to_string(line_no) + " is not tab-separated: '" + line + "'");
    const std::string a = line.substr(0, t1);
    const std::string b = line.substr(t1 + 1, t2 - t1 - 1);
    const std::string label = line.substr(t2 + 1);
    check(label == "0" || label == "1", "pair list line " + std::to_string(line_no) +
                                            " has invalid label '" + label + "' (want 0 or 1)");
    LoadedPair pair;
    pair.path_a = a;
    pair.path_b = b;
    auto resolve = [&base](const std::string& p) {
      const std::filesystem::path fp(p);
      return fp.is_absolute() ? fp : base / fp;
    };
    pair.image_a = read_image(resolve(a));
    pair.image_b = read_image(resolve(b));
    pair.label = label == "1";
    out.push_back(std::move(pair));
  }
  return out;
}

namespace {
std::string zero_padded(int value, int width) {
  std::ostringstream out;
  out.fill('0');
  out.width(width);
  out << value;
  return out.str();
}
}  // namespace

void save_dataset(const Dataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<int> counter;
  for (const ImageRecord& img : data.images) {
    check(img.identity_id >= 0, "cannot persist an image without an identity");
    if (img.identity_id >= static_cast<int>(counter.size())) counter.resize(img.identity_id + 1);
    const std::filesystem::path id_dir = dir / zero_padded(img.identity_id, 3);
    std::filesystem::create_directories(id_dir);
    const int n = counter[static_cast<size_t>(img.identity_id)]++;
    write_png(id_dir / (zero_padded(n, 3) + ".png"), img);
  }
}

Dataset load_dataset(const std::filesystem::path& dir) {
  check(std::filesystem::is_directory(dir), "dataset directory " + dir.string() + " not found");
  std::vector<std::filesystem::path> id_dirs;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_directory()) id_dirs.push_back(entry.path());
  }
  std::sort(id_dirs.begin(), id_dirs.end());

  Dataset data;
  for (const auto& id_dir : id_dirs) {
    const int identity = std::stoi(id_dir.filename().string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(id_dir)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      ImageRecord img = read_image(file);
      img.identity_id = identity;
      data.images.push_back(std::move(img));
    }
    data.num_identities = std::max(data.num_identities, identity + 1);
  }
  return data;
}

}  // namespace xcos
