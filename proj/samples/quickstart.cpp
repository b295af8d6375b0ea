// Train an RBF SVM on the toy table, report per-category calibration
// error, and compare against the sample count the kernel bound asks for.
//
//   quickstart [path/to/toy.csv]

#include <cstdio>
#include <exception>
#include <string>

#include "multical/multical.hpp"

int main(int argc, char** argv) {
  using namespace multical;
  const std::string path = argc > 1 ? argv[1] : MULTICAL_SAMPLES_DIR "/toy.csv";
  try {
    IngestOptions opt;
    opt.label_column = "label";
    opt.positive_labels = {"1"};
    opt.group_spec.protected_column = "groups";
    opt.group_spec.group_values = {"F", "M"};
    const auto ds = ingest_csv(path, opt);

    const auto model = train_rbf_svm(ds, {0.05, 1e-2, 20, 1});
    std::printf("train accuracy %.3f on %zu examples\n", accuracy(model, ds), ds.size());

    const auto stats = category_stats(model, ds);
    for (const auto& s : stats) {
      std::printf("  group %-2s label %d  members %3zu  freq %.3f  error ", s.category.group.c_str(),
                  s.category.predicted_label, s.member_count, s.frequency);
      if (s.calibration_error)
        std::printf("%+.3f\n", *s.calibration_error);
      else
        std::printf("undefined\n");
    }

    const auto freq = min_frequency_params(stats);
    bounds::FairnessParams p;
    p.epsilon = 0.3;
    p.delta = 0.1;
    p.gamma = freq.gamma;
    p.psi = freq.psi;
    const auto bound = bounds::kernel_multicalibration_bound(1.0, 1.0, p);
    std::printf("gamma %.3f psi %.3f -> kernel bound asks for %llu samples (have %zu)\n", freq.gamma, freq.psi,
                static_cast<unsigned long long>(bound.samples), ds.size());
  } catch (const Error& e) {
    const auto code = to_string(e.code());
    std::fprintf(stderr, "code=%.*s, msg=%s\n", int(code.size()), code.data(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  }
  return 0;
}
