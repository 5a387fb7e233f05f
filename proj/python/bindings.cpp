#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sguda/cluster.hpp"
#include "sguda/config_json.hpp"
#include "sguda/data.hpp"
#include "sguda/eval.hpp"
#include "sguda/gradcheck.hpp"
#include "sguda/losses.hpp"
#include "sguda/pipeline.hpp"

namespace py = pybind11;

namespace {

sguda::Matrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D float64 array");
    sguda::Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::copy(a.data(), a.data() + m.size(), m.data.begin());
    return m;
}

py::array_t<double> to_numpy(const sguda::Matrix& m) {
    py::array_t<double> out({m.rows, m.cols});
    std::copy(m.data.begin(), m.data.end(), out.mutable_data());
    return out;
}

py::dict report_to_dict(const sguda::EvalReport& r) {
    py::dict d;
    d["map"] = r.map;
    py::dict cmc;
    for (const auto& [rank, v] : r.cmc) cmc[py::int_(rank)] = v;
    d["cmc"] = cmc;
    d["num_queries"] = r.num_queries;
    if (r.has_diagnostics) {
        py::dict diag;
        if (r.diagnostics.nmi_available) diag["nmi"] = r.diagnostics.nmi;
        diag["num_clusters"] = r.diagnostics.num_clusters;
        diag["outlier_fraction"] = r.diagnostics.outlier_fraction;
        d["cluster_diagnostics"] = diag;
    }
    d["config_fingerprint"] = r.config_fingerprint;
    d["seed"] = r.seed;
    return d;
}

py::dict dataset_to_dict(const sguda::DomainDataset& ds) {
    py::dict d;
    d["features"] = to_numpy(ds.features());
    d["cameras"] = ds.cameras();
    d["domain"] = sguda::domain_name(ds.domain());
    d["split"] = sguda::split_name(ds.split());
    if (ds.labels_hidden())
        d["identities"] = py::none();
    else
        d["identities"] = ds.identities();
    return d;
}

sguda::PipelineConfig config_from_kwargs(const py::dict& kwargs) {
    nlohmann::json j = nlohmann::json::parse(
        py::module_::import("json").attr("dumps")(kwargs).cast<std::string>());
    return sguda::config_from_json(j);
}

}  // namespace

PYBIND11_MODULE(_sguda, m) {
    m.doc() = "source-guided pseudo-labeling domain adaptation core";

    using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

    m.def("matmul", [](const DArray& a, const DArray& b) {
        return to_numpy(sguda::matmul(to_matrix(a), to_matrix(b)));
    });

    m.def("pairwise_sqeuclidean", [](const DArray& x, const DArray& y) {
        return to_numpy(sguda::pairwise_sqeuclidean(to_matrix(x), to_matrix(y)));
    });

    m.def(
        "k_reciprocal_distances",
        [](const DArray& feats, std::size_t k1, std::size_t k2, double lambda) {
            sguda::RerankConfig cfg{k1, k2, lambda};
            return to_numpy(sguda::k_reciprocal_distances(to_matrix(feats), cfg));
        },
        py::arg("features"), py::arg("k1") = 20, py::arg("k2") = 6, py::arg("lambda_") = 0.3);

    m.def("eps_from_p",
          [](const DArray& dist, double p) { return sguda::eps_from_p(to_matrix(dist), p); });

    m.def(
        "dbscan",
        [](const DArray& dist, double eps, std::size_t min_samples) {
            const auto res = sguda::dbscan(to_matrix(dist), eps, min_samples);
            return py::make_tuple(res.labels, res.num_clusters);
        },
        py::arg("dist"), py::arg("eps"), py::arg("min_samples") = 4,
        "labels (-1 = outlier) and cluster count on a precomputed distance matrix");

    m.def(
        "kmeans",
        [](const DArray& feats, std::size_t k, std::uint64_t seed, std::size_t max_iters) {
            sguda::Rng rng(seed);
            return sguda::kmeans(to_matrix(feats), k, rng, max_iters).labels;
        },
        py::arg("features"), py::arg("k"), py::arg("seed") = 42, py::arg("max_iters") = 100);

    m.def(
        "triplet_batch_hard",
        [](const DArray& emb, const std::vector<int>& labels, double margin) {
            sguda::TripletConfig cfg;
            cfg.margin = margin;
            const auto res = sguda::triplet_batch_hard(to_matrix(emb), labels, cfg);
            return py::make_tuple(res.loss, to_numpy(res.grad_embeddings));
        },
        py::arg("embeddings"), py::arg("labels"), py::arg("margin") = 0.3);

    m.def(
        "evaluate_ranking",
        [](const DArray& dist, const std::vector<int>& query_ids, const std::vector<int>& query_cams,
           const std::vector<int>& gallery_ids, const std::vector<int>& gallery_cams,
           const std::vector<std::size_t>& cmc_ranks) {
            sguda::EvalProtocol proto;
            proto.cmc_ranks = cmc_ranks;
            return report_to_dict(sguda::evaluate_distances(to_matrix(dist), query_ids, query_cams,
                                                            gallery_ids, gallery_cams, proto));
        },
        py::arg("dist"), py::arg("query_ids"), py::arg("query_cams"), py::arg("gallery_ids"),
        py::arg("gallery_cams"), py::arg("cmc_ranks") = std::vector<std::size_t>{1, 5, 10});

    m.def("nmi", [](const std::vector<int>& a, const std::vector<int>& b) { return sguda::nmi(a, b); });

    m.def(
        "generate_synth",
        [](const py::kwargs& kwargs) {
            py::dict wrapped;
            wrapped["synth"] = kwargs;
            const sguda::PipelineConfig cfg = config_from_kwargs(wrapped);
            const sguda::TwoDomainData data = sguda::generate(cfg.synth);
            py::dict d;
            d["source_train"] = dataset_to_dict(data.source_train);
            d["source_query"] = dataset_to_dict(data.source_query);
            d["source_gallery"] = dataset_to_dict(data.source_gallery);
            d["target_train"] = dataset_to_dict(data.target_train);
            d["target_query"] = dataset_to_dict(data.target_query);
            d["target_gallery"] = dataset_to_dict(data.target_gallery);
            return d;
        },
        "synthesize the two-domain dataset; kwargs mirror the `synth` config block");

    m.def(
        "run_uda",
        [](const py::dict& config, const py::object& out_dir) {
            const sguda::PipelineConfig cfg = config_from_kwargs(config);
            const sguda::TwoDomainData data = sguda::generate(cfg.synth);
            const sguda::RunArtifacts artifacts = sguda::run(cfg, data);
            if (!out_dir.is_none())
                sguda::write_artifacts(artifacts, out_dir.cast<std::string>());
            py::dict d;
            d["init_report"] = report_to_dict(artifacts.init_report);
            py::list iters;
            for (const auto& rec : artifacts.iterations) {
                py::dict it;
                it["iteration"] = rec.iteration;
                it["report"] = report_to_dict(rec.report);
                it["surviving_clusters"] = rec.surviving_clusters;
                it["num_outliers"] = rec.pseudo.num_outliers();
                iters.append(it);
            }
            d["iterations"] = iters;
            d["final_map"] = artifacts.final_report().map;
            d["config_fingerprint"] = artifacts.config_fingerprint;
            return d;
        },
        py::arg("config") = py::dict(), py::arg("out_dir") = py::none(),
        "full pipeline on synthetic data; config keys mirror config_resolved.json");

    m.def(
        "gradcheck",
        [](std::uint64_t seed) {
            const auto rep = sguda::run_full_gradcheck(seed);
            py::list cases;
            for (const auto& c : rep.cases)
                cases.append(py::make_tuple(c.name, c.max_rel_err, c.tolerance, c.pass));
            return py::make_tuple(rep.all_pass, cases);
        },
        py::arg("seed") = 42);

    m.def("default_config", [] {
        const sguda::PipelineConfig cfg;
        return py::module_::import("json")
            .attr("loads")(sguda::config_to_json(cfg).dump())
            .cast<py::dict>();
    });
}
