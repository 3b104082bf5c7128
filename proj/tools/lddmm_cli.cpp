// Command-line front end: register a pair of images, evaluate metrics on
// existing fields, or synthesize test data.
//
// Exit codes: 0 on success (including a run that stops at the iteration
// cap), 1 on usage or input errors, 2 when transport diverges (the message
// names the failing step).

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include <lddmm/lddmm.hpp>

namespace {

using nlohmann::json;

struct RegOpts {
  std::string source, target, out;
  std::string source_labels, target_labels;
  std::string v0_path;
  std::string variant = "original";
  std::string integrator = "sl";
  std::string repr = "band";
  std::string param = "stationary";
  int band = 32;
  int nt = 0;  // 0: pick by integrator (sl 5, rk4 25)
  double alpha = 0.0025;
  int s = 2;
  double sigma2 = 1.0;
  int max_iter = 50;
  int pcg_iter = 5;
  bool no_rescale = false;
};

struct EvalOpts {
  std::string source, target, warped;
  std::string warped_labels, target_labels;
  std::string displacement;
  std::string out;
};

struct SynthOpts {
  std::string kind = "blobs";
  std::string out;
  int n = 64;
  int d = 2;
  double spacing = 1.0;
  std::uint64_t seed = 42;
};

lddmm::Variant parse_variant(const std::string& s) {
  if (s == "original") return lddmm::Variant::original;
  if (s == "state_equation") return lddmm::Variant::state_equation;
  if (s == "deformation_state_equation") return lddmm::Variant::deformation_state_equation;
  throw lddmm::Error("unknown variant: " + s);
}

lddmm::Integrator parse_integrator(const std::string& s) {
  if (s == "sl") return lddmm::Integrator::sl;
  if (s == "rk4") return lddmm::Integrator::rk4;
  throw lddmm::Error("unknown integrator: " + s + " (expected sl or rk4)");
}

lddmm::Parameterization parse_param(const std::string& s) {
  if (s == "stationary") return lddmm::Parameterization::stationary;
  if (s == "nonstationary") return lddmm::Parameterization::nonstationary;
  throw lddmm::Error("unknown parameterization: " + s);
}

lddmm::ScalarField load_scalar(const std::string& path) {
  lddmm::LoadedField f = lddmm::load_field(path);
  if (f.kind == lddmm::FieldKind::vector)
    throw lddmm::Error(path + ": expected a scalar or label field, got a vector field");
  return f.scalar;
}

lddmm::VectorField load_vector(const std::string& path) {
  lddmm::LoadedField f = lddmm::load_field(path);
  if (f.kind != lddmm::FieldKind::vector)
    throw lddmm::Error(path + ": expected a vector field");
  return f.vector;
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

std::string grid_to_string(const lddmm::GridSpec& g) {
  std::ostringstream os;
  for (int a = 0; a < g.d; ++a) os << (a ? "x" : "") << g.dims[a];
  return os.str();
}

// ---------------------------------------------------------------------------

template <class Alg>
int run_registration(typename Alg::Domain dom, const lddmm::ScalarField& I0,
                     const lddmm::ScalarField& I1, const RegOpts& o, int nt) {
  using namespace lddmm;
  Model<Alg> model(dom, I0, I1);
  model.variant = parse_variant(o.variant);
  model.integrator = parse_integrator(o.integrator);
  model.nt = nt;
  model.sigma2 = o.sigma2;
  model.lop = SobolevOperator(o.alpha, o.s);

  auto v = model.zero_velocity(parse_param(o.param));
  if (!o.v0_path.empty()) {
    VectorField w = load_vector(o.v0_path);
    detail::require(w.grid == model.grid(), "--v0 grid does not match the images");
    auto w_dom = Alg::from_spatial(w, dom);
    for (int i = 0; i < v.node_count(); ++i) v.fields[static_cast<std::size_t>(i)] = w_dom;
  }

  OptimizeOptions opt;
  opt.max_iter = o.max_iter;
  opt.pcg_max_iter = o.pcg_iter;

  const auto t0 = std::chrono::steady_clock::now();
  OptimizeResult<Alg> res = optimize(model, v, opt);
  const double wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  RegistrationMaps maps = compute_maps(model, res.v);
  ScalarField warped = warp(I0, maps.forward_pts, Interp::cubic);
  ScalarField jac_fwd = map_jacobian_determinant(maps.forward_disp);
  ScalarField jac_inv = map_jacobian_determinant(maps.inverse_disp);
  ValueRange jr_fwd = value_range(jac_fwd);
  ValueRange jr_inv = value_range(jac_inv);

  write_field(join_path(o.out, "displacement_forward"), maps.forward_disp);
  write_field(join_path(o.out, "displacement_inverse"), maps.inverse_disp);
  write_field(join_path(o.out, "warped_source"), warped);
  if (res.v.is_stationary()) {
    write_field(join_path(o.out, "velocity"), Alg::to_spatial(res.v.node(0)));
  } else {
    for (int i = 0; i < res.v.node_count(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "velocity_%02d", i);
      write_field(join_path(o.out, name), Alg::to_spatial(res.v.node(i)));
    }
  }

  double dice_mean = -1.0;
  if (!o.source_labels.empty()) {
    ScalarField labels = load_scalar(o.source_labels);
    detail::require(labels.grid == model.grid(), "--source-labels grid mismatch");
    ScalarField warped_labels = warp_nearest(labels, maps.forward_pts);
    write_field(join_path(o.out, "warped_labels"), warped_labels, FieldKind::labels);
    if (!o.target_labels.empty()) {
      ScalarField tl = load_scalar(o.target_labels);
      detail::require(tl.grid == model.grid(), "--target-labels grid mismatch");
      dice_mean = mean_dice(warped_labels, tl);
    }
  }

  const double mse_initial = res.history.front().mse_rel;
  const double mse_final = res.history.back().mse_rel;

  json rep;
  rep["variant"] = o.variant;
  rep["integrator"] = o.integrator;
  rep["representation"] = o.repr;
  rep["parameterization"] = o.param;
  rep["nt"] = nt;
  rep["alpha"] = o.alpha;
  rep["s"] = o.s;
  rep["sigma2"] = o.sigma2;
  rep["dims"] = std::vector<int>(model.grid().dims.begin(), model.grid().dims.begin() + model.grid().d);
  if constexpr (std::is_same_v<Alg, lddmm::BandAlgebra>)
    rep["band"] = std::vector<int>(dom.bounds.begin(), dom.bounds.begin() + dom.d());
  rep["rescaled_inputs"] = !o.no_rescale;
  rep["converged"] = res.converged;
  rep["stop_reason"] = to_string(res.stop);
  rep["iterations"] = res.iterations;
  rep["final_energy"] = res.final_energy;
  rep["rel_grad"] = res.rel_grad;
  rep["mse_rel_initial"] = mse_initial;
  rep["mse_rel_final"] = mse_final;
  rep["cfl"] = res.history.back().cfl;
  rep["jacobian_forward"] = {{"min", jr_fwd.min}, {"max", jr_fwd.max}};
  rep["jacobian_inverse"] = {{"min", jr_inv.min}, {"max", jr_inv.max}};
  if (dice_mean >= 0.0) rep["dice_mean"] = dice_mean;
  rep["wall_ms"] = wall_ms;
  write_json(join_path(o.out, "report.json"), rep);
  write_convergence_csv(join_path(o.out, "convergence.csv"), res.history);

  std::ostringstream sum;
  sum << "registration summary\n"
      << "  variant:        " << o.variant << "\n"
      << "  integrator:     " << o.integrator << " (nt=" << nt << ")\n"
      << "  representation: " << o.repr << "\n"
      << "  parameterization: " << o.param << "\n"
      << "  grid:           " << grid_to_string(model.grid()) << "\n"
      << "  iterations:     " << res.iterations << "\n"
      << "  stop reason:    " << to_string(res.stop) << "\n"
      << "  converged:      " << (res.converged ? "yes" : "no") << "\n"
      << "  energy:         " << res.history.front().energy << " -> " << res.final_energy << "\n"
      << "  mse_rel:        " << mse_initial << " -> " << mse_final << "\n"
      << "  rel_grad:       " << res.rel_grad << "\n"
      << "  jacobian fwd:   [" << jr_fwd.min << ", " << jr_fwd.max << "]\n"
      << "  jacobian inv:   [" << jr_inv.min << ", " << jr_inv.max << "]\n";
  if (dice_mean >= 0.0) sum << "  dice mean:      " << dice_mean << "\n";
  sum << "  wall:           " << wall_ms << " ms\n";
  write_text(join_path(o.out, "summary.txt"), sum.str());
  std::cout << sum.str();
  return 0;
}

int do_register(const RegOpts& o) {
  using namespace lddmm;
  ScalarField I0 = load_scalar(o.source);
  ScalarField I1 = load_scalar(o.target);
  detail::require(I0.grid == I1.grid, "source and target must share one grid");
  if (!o.no_rescale) {
    I0 = rescale_unit(I0);
    I1 = rescale_unit(I1);
  }
  const Integrator integ = parse_integrator(o.integrator);
  const int nt = o.nt > 0 ? o.nt : (integ == Integrator::rk4 ? 25 : 5);

  if (o.repr == "spatial") return run_registration<SpatialAlgebra>(I0.grid, I0, I1, o, nt);
  if (o.repr == "band" || o.repr == "bl") {
    detail::require(o.band >= 4 && o.band % 2 == 0, "--band must be even and >= 4");
    std::array<int, kMaxDim> bounds{1, 1, 1};
    for (int a = 0; a < I0.grid.d; ++a) bounds[a] = std::min(o.band, I0.grid.dims[a]);
    return run_registration<BandAlgebra>(BandSpec(I0.grid, bounds), I0, I1, o, nt);
  }
  throw Error("unknown representation: " + o.repr + " (expected spatial or band)");
}

int do_evaluate(const EvalOpts& o) {
  using namespace lddmm;
  ScalarField src = load_scalar(o.source);
  ScalarField tgt = load_scalar(o.target);
  detail::require(src.grid == tgt.grid, "source and target must share one grid");
  ScalarField warped = o.warped.empty() ? src : load_scalar(o.warped);
  detail::require(warped.grid == tgt.grid, "--warped grid mismatch");

  json rep;
  rep["mse_rel"] = mse_rel(warped, tgt, src);
  if (!o.warped_labels.empty() && !o.target_labels.empty()) {
    ScalarField wl = load_scalar(o.warped_labels);
    ScalarField tl = load_scalar(o.target_labels);
    detail::require(wl.grid == tl.grid, "label grids mismatch");
    rep["dice_mean"] = mean_dice(wl, tl);
  }
  if (!o.displacement.empty()) {
    VectorField disp = load_vector(o.displacement);
    ValueRange r = value_range(map_jacobian_determinant(disp));
    rep["jacobian"] = {{"min", r.min}, {"max", r.max}};
  }
  std::cout << rep.dump(2) << "\n";
  if (!o.out.empty()) write_json(o.out, rep);
  return 0;
}

int do_synth(const SynthOpts& o) {
  using namespace lddmm;
  detail::require(o.d == 2 || o.d == 3, "--d must be 2 or 3");
  GridSpec g = GridSpec::uniform(o.d, o.n, o.spacing);

  if (o.kind == "blobs") {
    ImagePair p = blob_pair(g, o.seed);
    write_field(join_path(o.out, "source"), p.source);
    write_field(join_path(o.out, "target"), p.target);
  } else if (o.kind == "discs") {
    LabelCase c = two_disc_case(g, o.seed);
    write_field(join_path(o.out, "source"), c.source);
    write_field(join_path(o.out, "target"), c.target);
    write_field(join_path(o.out, "source_labels"), c.source_labels, FieldKind::labels);
    write_field(join_path(o.out, "target_labels"), c.target_labels, FieldKind::labels);
  } else if (o.kind == "rotation") {
    ImagePair p = blob_pair(g, o.seed);
    VectorField rot = rotation_field(g, 0.5, 0.2 * g.extent(0));
    auto vel = TimeVaryingVelocity<VectorField>::stationary(rot, 10);
    VelocityProvider<VectorField> prov(vel, 10);
    auto series = sl_integrate(p.source, 10, Direction::forward, prov, nullptr);
    write_field(join_path(o.out, "source"), p.source);
    write_field(join_path(o.out, "target"), series.terminal());
  } else {
    throw Error("unknown synth kind: " + o.kind + " (expected blobs, discs, or rotation)");
  }
  std::cout << "wrote " << o.kind << " fixtures to " << o.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diffeomorphic image registration on periodic grids"};
  app.require_subcommand(1);

  RegOpts reg;
  auto* r = app.add_subcommand("register", "register a source image onto a target");
  r->add_option("--source", reg.source, "source image (.raw with .json sidecar)")->required();
  r->add_option("--target", reg.target, "target image")->required();
  r->add_option("--out", reg.out, "output directory")->required();
  r->add_option("--variant", reg.variant,
                "original | state_equation | deformation_state_equation");
  r->add_option("--integrator", reg.integrator, "sl | rk4");
  r->add_option("--repr", reg.repr, "band | spatial (velocity representation)");
  r->add_option("--param", reg.param, "stationary | nonstationary");
  r->add_option("--band", reg.band, "retained modes per axis for --repr band");
  r->add_option("--nt", reg.nt, "time steps (default: 5 for sl, 25 for rk4)");
  r->add_option("--alpha", reg.alpha, "regularizer strength");
  r->add_option("--s", reg.s, "regularizer exponent");
  r->add_option("--sigma2", reg.sigma2, "data-term weight 1/sigma2");
  r->add_option("--max-iter", reg.max_iter, "outer iteration cap");
  r->add_option("--pcg-iter", reg.pcg_iter, "inner PCG iteration cap");
  r->add_option("--v0", reg.v0_path, "warm-start velocity (spatial vector field)");
  r->add_option("--source-labels", reg.source_labels, "labels to carry through the map");
  r->add_option("--target-labels", reg.target_labels, "reference labels for Dice");
  r->add_flag("--no-rescale", reg.no_rescale, "skip min-max rescaling of inputs");

  EvalOpts ev;
  auto* e = app.add_subcommand("evaluate", "compute metrics on existing fields");
  e->add_option("--source", ev.source, "source image")->required();
  e->add_option("--target", ev.target, "target image")->required();
  e->add_option("--warped", ev.warped, "warped source (defaults to the source)");
  e->add_option("--warped-labels", ev.warped_labels, "warped label field");
  e->add_option("--target-labels", ev.target_labels, "reference label field");
  e->add_option("--displacement", ev.displacement, "displacement field for Jacobian range");
  e->add_option("--out", ev.out, "also write the report to this path");

  SynthOpts sy;
  auto* s = app.add_subcommand("synth", "generate synthetic test fixtures");
  s->add_option("--kind", sy.kind, "blobs | discs | rotation");
  s->add_option("--out", sy.out, "output directory")->required();
  s->add_option("--n", sy.n, "grid points per axis");
  s->add_option("--d", sy.d, "dimension (2 or 3)");
  s->add_option("--spacing", sy.spacing, "grid spacing");
  s->add_option("--seed", sy.seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe);
    return code == 0 ? 0 : 1;
  }

  try {
    if (r->parsed()) return do_register(reg);
    if (e->parsed()) return do_evaluate(ev);
    if (s->parsed()) return do_synth(sy);
    return 1;
  } catch (const lddmm::DivergenceError& de) {
    std::cerr << "error: transport diverged: " << de.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
}
