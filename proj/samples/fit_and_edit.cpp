// Fits a small Gaussian LUT to a synthetic grade, pushes one color toward a new target,
// bakes the result and undoes the edit.
//
//   sample_fit_and_edit [out_dir]

#include <cstdio>
#include <string>

#include "glut/glut.hpp"

int main(int argc, char** argv) {
    const std::string dir = argc > 1 ? argv[1] : ".";
    const glut::CubeLut grade = glut::gamma_mix_cube(33);

    glut::TrainConfig cfg;
    cfg.train_q = 64;  // 32 leaves the steep dark end of the curve between lattice points
    cfg.holdout_count = 16384;
    cfg.seed = 1;
    const auto fit = glut::fit_glut(grade, 32, cfg, [](const glut::EpochRecord& r) {
        std::printf("epoch %2d  psnr %6.2f dB  dE00 %.3f\n", r.epoch, r.holdout_psnr, r.holdout_de00);
    });

    glut::EditJournal journal(fit.model);
    const glut::Rgb sky{0.35, 0.55, 0.85};
    const glut::Rgb teal{0.20, 0.60, 0.65};
    const auto& rec = journal.apply({sky, teal, 4, 0.8});
    std::printf("edit: m = %.4f, |residual| %.4f -> %.4f\n", rec.movement, glut::norm(rec.residual_before), glut::norm(rec.residual_after));

    glut::write_file_bytes(dir + "/edited.glut", glut::serialize(journal.current()));
    glut::write_cube_file(dir + "/edited.cube", glut::bake_to_cube(journal.current(), 33));

    journal.undo_last();
    std::printf("undo restores the fit: %s\n", journal.current() == fit.model ? "yes" : "no");
    return 0;
}
