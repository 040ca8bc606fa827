#include "geofuse/gradcheck.hpp"

#include <ostream>

namespace geofuse {

int gradcheck_main(std::ostream& out, bool verbose) {
    struct Wiring {
        const char* name;
        MergeStage stage;
        MergeMode mode;
    };
    const Wiring wirings[] = {
        {"early/local", MergeStage::early, MergeMode::local},
        {"early/padding", MergeStage::early, MergeMode::padding},
        {"late", MergeStage::late, MergeMode::local},
    };

    double worst32 = 0.0, worst64 = 0.0;
    for (const Wiring& w : wirings) {
        GradReport r32 = gradcheck_pipeline<float>(w.stage, w.mode, 1e-5, 8, 11);
        GradReport r64 = gradcheck_pipeline<double>(w.stage, w.mode, 1e-5, 8, 11);
        worst32 = std::max(worst32, r32.max_rel);
        worst64 = std::max(worst64, r64.max_rel);
        out << w.name << "  float32 max rel err " << r32.max_rel << "  float64 max rel err "
            << r64.max_rel << "\n";
        if (verbose) {
            for (std::size_t i = 0; i < r32.tensors.size(); ++i)
                out << "  " << r32.tensors[i].name << "  f32 " << r32.tensors[i].max_rel
                    << "  f64 " << r64.tensors[i].max_rel << "\n";
        }
    }
    bool ok = worst32 < kGradTolF32 && worst64 < kGradTolF64;
    out << "float32 worst " << worst32 << " (tol " << kGradTolF32 << "), float64 worst " << worst64
        << " (tol " << kGradTolF64 << "): " << (ok ? "pass" : "FAIL") << "\n";
    return ok ? 0 : 4;
}

}  // namespace geofuse
