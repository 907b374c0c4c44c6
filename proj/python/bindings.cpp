#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "garmentsynth/diffusion.hpp"
#include "garmentsynth/error.hpp"
#include "garmentsynth/evalkit.hpp"
#include "garmentsynth/garment_world.hpp"
#include "garmentsynth/io.hpp"
#include "garmentsynth/manipulation.hpp"
#include "garmentsynth/prompt_parser.hpp"
#include "garmentsynth/similarity.hpp"

namespace py = pybind11;
namespace gs = garmentsynth;
using nlohmann::json;

namespace {

// JSON crosses the boundary as text through Python's json module.
py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::handle& obj) {
  return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

// Defaults overlaid with the given keys, then validated.
gs::Config make_config(const std::optional<py::dict>& overrides) {
  gs::Config cfg;
  if (overrides) {
    json j = cfg.to_json();
    const json given = from_py(*overrides);
    for (const auto& [k, v] : given.items()) {
      if (!j.contains(k)) throw gs::Error(gs::ErrorCode::kInvalidConfig, "unknown config key '" + k + "'");
      j[k] = v;
    }
    cfg = gs::Config::from_json(j);
  }
  cfg.validate();
  return cfg;
}

py::array_t<double> to_array(const gs::Image& img) {
  py::array_t<double> out({img.height(), img.width(), 3});
  auto* dst = out.mutable_data();
  std::copy(img.data().begin(), img.data().end(), dst);
  return out;
}

gs::Image from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 3 || arr.shape(2) != 3) {
    throw gs::Error(gs::ErrorCode::kBadShape, "image must have shape (height, width, 3)");
  }
  gs::Image img(static_cast<int>(arr.shape(1)), static_cast<int>(arr.shape(0)));
  std::copy(arr.data(), arr.data() + arr.size(), img.data().begin());
  return img;
}

gs::World world_for(const gs::Config& cfg) { return gs::load_world(cfg.lexicon_path, cfg.templates_path); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Garment synthesis with attribute-phrase guidance";

  // args are (code name, message). The type lives as long as the interpreter.
  static PyObject* error_type = PyErr_NewException("_core.Error", PyExc_RuntimeError, nullptr);
  m.attr("Error") = py::handle(error_type);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const gs::Error& e) {
      py::tuple args = py::make_tuple(std::string(gs::error_code_name(e.code())), e.what());
      PyErr_SetObject(error_type, args.ptr());
    }
  });

  m.def("default_config", [] { return to_py(gs::Config{}.to_json()); }, "Default sampler settings.");

  m.def(
      "parse",
      [](const std::string& prompt) { return to_py(gs::parse_prompt(prompt, gs::World::builtin().lexicon).to_json()); },
      py::arg("prompt"), "Attribute-phrase tree of a prompt.");

  m.def(
      "render",
      [](const py::dict& scene) {
        const gs::World world = gs::World::builtin();
        return to_array(gs::render(gs::GarmentScene::from_json(from_py(scene)), world.templates));
      },
      py::arg("scene"), "Render a scene description to a canvas image.");

  m.def(
      "infer_scene",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& image, const std::string& category) {
        const gs::World world = gs::World::builtin();
        return to_py(gs::infer_scene(from_array(image), category, world).to_json(world.lexicon));
      },
      py::arg("image"), py::arg("category"), "Recover a scene description from an image.");

  m.def(
      "sim_full",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& image, const std::string& prompt) {
        const gs::World world = gs::World::builtin();
        return gs::sim_full(from_array(image), gs::parse_prompt(prompt, world.lexicon), world);
      },
      py::arg("image"), py::arg("prompt"), "Image-prompt similarity in [0, 1].");

  m.def(
      "synth",
      [](const std::string& prompt, std::uint64_t seed, const std::optional<py::dict>& config) {
        gs::Config cfg = make_config(config);
        cfg.seed = seed;
        gs::SampleResult res;
        json tree;
        {
          py::gil_scoped_release release;
          const gs::World world = world_for(cfg);
          const gs::APTree parsed = gs::parse_prompt(prompt, world.lexicon);
          const gs::PrototypeBank bank = gs::build_prototype_bank(world, {parsed.category}, cfg.bank_cap, cfg.bank_seed);
          const gs::Sampler sampler(world, bank, cfg);
          res = sampler.sample(sampler.prepare(parsed), seed);
          tree = parsed.to_json();
        }
        py::dict out;
        out["image"] = to_array(res.image);
        out["tree"] = to_py(tree);
        out["trajectory"] = to_py(res.trajectory_json());
        out["config"] = to_py(cfg.to_json());
        return out;
      },
      py::arg("prompt"), py::arg("seed") = 0, py::arg("config") = py::none(), "Sample an image for a prompt.");

  m.def(
      "manipulate",
      [](const std::string& old_prompt, const std::string& new_prompt, std::uint64_t seed,
         const std::optional<py::dict>& config) {
        gs::EditRequest req{old_prompt, new_prompt, seed, make_config(config), std::nullopt};
        req.cfg.seed = seed;
        gs::EditResult res;
        {
          py::gil_scoped_release release;
          const gs::World world = world_for(req.cfg);
          const gs::APTree tree = gs::parse_prompt(old_prompt, world.lexicon);
          const gs::PrototypeBank bank =
              gs::build_prototype_bank(world, {tree.category}, req.cfg.bank_cap, req.cfg.bank_seed);
          res = gs::manipulate(req, world, bank);
        }
        py::dict out;
        out["original"] = to_array(res.original);
        out["edited"] = to_array(res.edited);
        out["report"] = to_py(res.report());
        return out;
      },
      py::arg("old_prompt"), py::arg("new_prompt"), py::arg("seed") = 0, py::arg("config") = py::none(),
      "Edit the image of one prompt into another, keeping unedited regions.");

  m.def(
      "run_suite",
      [](const py::dict& suite, const std::optional<std::vector<std::string>>& variants) {
        const gs::SuiteSpec spec = gs::SuiteSpec::from_json(from_py(suite));
        std::vector<gs::Variant> chosen = gs::ablation_variants();
        if (variants) {
          std::vector<gs::Variant> picked;
          for (const std::string& name : *variants) {
            bool found = false;
            for (const gs::Variant& v : chosen) {
              if (v.name == name) {
                picked.push_back(v);
                found = true;
              }
            }
            if (!found) throw gs::Error(gs::ErrorCode::kInvalidConfig, "unknown variant '" + name + "'");
          }
          chosen = picked;
        }
        json reports = json::array();
        {
          py::gil_scoped_release release;
          const gs::World world = world_for(spec.cfg);
          spec.cfg.validate();
          spec.validate(world);
          for (const gs::SuiteReport& r : gs::run_suite(spec, world, chosen)) reports.push_back(r.to_json(world.lexicon));
        }
        return to_py(reports);
      },
      py::arg("suite"), py::arg("variants") = py::none(), "Evaluate a suite; one report per ablation variant.");
}
