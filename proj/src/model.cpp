#include "model.hpp"

#include <filesystem>

#include "error.hpp"

namespace vpb {

std::shared_ptr<const VelocityModel> VelocityModel::build(int K, int quad_order, const CollisionConfig& cfg,
                                                          const std::string& cache_dir) {
  auto m = std::make_shared<VelocityModel>();
  if (cache_dir.empty()) {
    m->basis = std::make_shared<const HermiteBasis>(K, quad_order);
  } else {
    std::error_code ec;
    std::filesystem::create_directories(cache_dir, ec);
    if (ec) io_error("cannot create cache directory '" + cache_dir + "': " + ec.message());
    const auto path = (std::filesystem::path(cache_dir) /
                       ("basis_K" + std::to_string(K) + "_q" + std::to_string(quad_order) + ".bin"))
                          .string();
    if (std::filesystem::exists(path)) {
      m->basis = std::make_shared<const HermiteBasis>(HermiteBasis::load(path));
    } else {
      auto b = std::make_shared<const HermiteBasis>(K, quad_order);
      b->save(path);
      m->basis = b;
    }
  }
  m->ops = std::make_shared<const CollisionOperators>(CollisionOperators::cached(*m->basis, cfg, cache_dir));
  m->proj = make_projections(*m->basis);
  m->moments = thirteen_moments(*m->basis);
  m->transport = compute_transport(*m->ops, m->proj, m->moments);
  return m;
}

}  // namespace vpb
