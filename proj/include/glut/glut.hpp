#pragma once

#include "glut/cglut.hpp"
#include "glut/color.hpp"
#include "glut/cube_lut.hpp"
#include "glut/edit_service.hpp"
#include "glut/editing.hpp"
#include "glut/eval_bench.hpp"
#include "glut/glut_model.hpp"
#include "glut/gradients.hpp"
#include "glut/image.hpp"
#include "glut/losses.hpp"
#include "glut/metrics.hpp"
#include "glut/model_io.hpp"
#include "glut/optim.hpp"
#include "glut/pipeline.hpp"
#include "glut/synthetic.hpp"
#include "glut/train.hpp"
