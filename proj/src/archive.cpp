#include "oeduu/archive.hpp"

#include "oeduu/csv.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace oeduu {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

std::string cluster_dir(int c) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "cluster_%03d", c);
  return buf;
}

std::string sample_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sample_%03d", i);
  return buf;
}

/// Field written as an ny x nx matrix, row-major in y (row iy holds the
/// nodal values of that grid row).
Eigen::MatrixXd field_to_matrix(const Field& f, const Grid& g) {
  Eigen::MatrixXd m(g.ny, g.nx);
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) m(iy, ix) = f[g.node(ix, iy)];
  }
  return m;
}

}  // namespace

std::vector<int> RomBundle::basis_sizes() const {
  std::vector<int> sizes(clustering.n_clusters, 0);
  for (const auto& m : models) {
    sizes[m.cluster_id] = static_cast<int>(m.basis->basis_obs.cols());
  }
  return sizes;
}

void save_sample(const UncertainSample& sample, const Grid& grid,
                 const std::string& dir) {
  fs::create_directories(dir);
  write_matrix_csv(dir + "/theta.csv", field_to_matrix(sample.theta, grid));
  write_matrix_csv(dir + "/pressure.csv",
                   field_to_matrix(sample.pressure, grid));
  write_matrix_csv(dir + "/velocity_x.csv",
                   field_to_matrix(sample.velocity_x, grid));
  write_matrix_csv(dir + "/velocity_y.csv",
                   field_to_matrix(sample.velocity_y, grid));
  json meta;
  meta["seed"] = sample.seed;
  meta["t0"] = sample.t0;
  std::ofstream out(dir + "/meta.json");
  out << meta.dump(2) << '\n';
}

std::string save_rom(const RomBundle& bundle, const std::string& dir,
                     bool export_sample_fields) {
  fs::create_directories(dir);
  std::vector<std::string> data_files;

  // One basis directory per cluster; bases are shared across samples.
  std::vector<std::shared_ptr<const ClusterBasis>> bases(
      bundle.clustering.n_clusters);
  for (const auto& m : bundle.models) bases[m.cluster_id] = m.basis;
  for (int c = 0; c < bundle.clustering.n_clusters; ++c) {
    const std::string cdir = dir + "/" + cluster_dir(c);
    fs::create_directories(cdir);
    write_matrix_csv(cdir + "/basis_obs.csv", bases[c]->basis_obs);
    write_matrix_csv(cdir + "/basis_param.csv", bases[c]->basis_param);
    write_matrix_csv(cdir + "/prior_gram.csv", bases[c]->prior_gram);
    write_vector_csv(cdir + "/sv_obs.csv", bases[c]->sv_obs);
    write_vector_csv(cdir + "/sv_param.csv", bases[c]->sv_param);
    for (const char* f : {"basis_obs.csv", "basis_param.csv", "prior_gram.csv",
                          "sv_obs.csv", "sv_param.csv"}) {
      data_files.push_back(cluster_dir(c) + std::string("/") + f);
    }
  }
  for (std::size_t i = 0; i < bundle.models.size(); ++i) {
    const std::string sdir = dir + "/" + sample_name(static_cast<int>(i));
    fs::create_directories(sdir);
    write_matrix_csv(sdir + "/core.csv", bundle.models[i].core);
    data_files.push_back(sample_name(static_cast<int>(i)) + "/core.csv");
  }
  if (export_sample_fields && !bundle.operators.empty()) {
    const Grid grid = bundle.config.make_grid();
    for (std::size_t i = 0; i < bundle.operators.size(); ++i) {
      save_sample(bundle.operators[i]->sample(), grid,
                  dir + "/samples/" + sample_name(static_cast<int>(i)));
    }
  }

  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["phase_tag"] = bundle.phase_tag;
  manifest["mu"] = bundle.mu;
  manifest["master_seed"] = bundle.master_seed;
  manifest["sample_seeds"] = bundle.sample_seeds;
  manifest["t0s"] = bundle.t0s;
  manifest["assignments"] = bundle.clustering.assignment;
  manifest["n_clusters"] = bundle.clustering.n_clusters;
  manifest["basis_sizes"] = bundle.basis_sizes();
  manifest["config"] = config_to_json(bundle.config);
  json checksums;
  for (const auto& f : data_files) {
    checksums[f] = file_checksum(dir + "/" + f);
  }
  manifest["checksums"] = checksums;

  const std::string manifest_path = dir + "/manifest.json";
  std::ofstream out(manifest_path);
  if (!out) throw std::runtime_error("cannot write " + manifest_path);
  out << manifest.dump(2) << '\n';
  return manifest_path;
}

RomBundle load_rom(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  if (!in) throw std::runtime_error("no ROM manifest in " + dir);
  json manifest;
  in >> manifest;
  if (manifest.at("format_version").get<int>() != kFormatVersion) {
    throw std::runtime_error("unsupported ROM format version");
  }

  RomBundle bundle;
  bundle.config = parse_config(manifest.at("config"));
  bundle.phase_tag = manifest.at("phase_tag").get<std::string>();
  bundle.mu = manifest.at("mu").get<double>();
  bundle.master_seed = manifest.at("master_seed").get<std::uint64_t>();
  bundle.sample_seeds =
      manifest.at("sample_seeds").get<std::vector<std::uint64_t>>();
  bundle.t0s = manifest.at("t0s").get<std::vector<double>>();
  bundle.clustering.assignment =
      manifest.at("assignments").get<std::vector<int>>();
  bundle.clustering.n_clusters = manifest.at("n_clusters").get<int>();
  bundle.prior = bundle.config.make_prior();
  bundle.sensors = bundle.config.make_sensors();

  for (const auto& [file, sum] : manifest.at("checksums").items()) {
    if (file_checksum(dir + "/" + file) != sum.get<std::uint64_t>()) {
      throw std::runtime_error("ROM archive corrupted: " + file);
    }
  }

  std::vector<std::shared_ptr<const ClusterBasis>> bases;
  for (int c = 0; c < bundle.clustering.n_clusters; ++c) {
    auto basis = std::make_shared<ClusterBasis>();
    const std::string cdir = dir + "/" + cluster_dir(c);
    basis->basis_obs = read_matrix_csv(cdir + "/basis_obs.csv");
    basis->basis_param = read_matrix_csv(cdir + "/basis_param.csv");
    basis->prior_gram = read_matrix_csv(cdir + "/prior_gram.csv");
    basis->sv_obs = read_vector_csv(cdir + "/sv_obs.csv");
    basis->sv_param = read_vector_csv(cdir + "/sv_param.csv");
    basis->cluster_id = c;
    bases.push_back(std::move(basis));
  }
  for (std::size_t i = 0; i < bundle.sample_seeds.size(); ++i) {
    ReducedForward rf;
    rf.cluster_id = bundle.clustering.assignment[i];
    rf.basis = bases[rf.cluster_id];
    rf.core =
        read_matrix_csv(dir + "/" + sample_name(static_cast<int>(i)) + "/core.csv");
    rf.sample_seed = bundle.sample_seeds[i];
    bundle.models.push_back(std::move(rf));
  }
  for (const auto& m : bundle.models) bundle.grams.push_back(gramians(m));
  return bundle;
}

std::uint64_t archive_checksum(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  if (!in) throw std::runtime_error("no ROM manifest in " + dir);
  json manifest;
  in >> manifest;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [file, sum] : manifest.at("checksums").items()) {
    (void)file;
    h ^= sum.get<std::uint64_t>();
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace oeduu
