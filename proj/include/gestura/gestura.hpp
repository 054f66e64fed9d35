#pragma once

#include "gestura/clip.hpp"
#include "gestura/dataset.hpp"
#include "gestura/error.hpp"
#include "gestura/judge.hpp"
#include "gestura/landmark.hpp"
#include "gestura/landmark_io.hpp"
#include "gestura/matrix.hpp"
#include "gestura/metrics/accuracy.hpp"
#include "gestura/metrics/agreement.hpp"
#include "gestura/metrics/bleu.hpp"
#include "gestura/metrics/bootstrap.hpp"
#include "gestura/metrics/report.hpp"
#include "gestura/metrics/stats.hpp"
#include "gestura/metrics/topk.hpp"
#include "gestura/projector.hpp"
#include "gestura/serving/bench.hpp"
#include "gestura/serving/client.hpp"
#include "gestura/serving/protocol.hpp"
#include "gestura/serving/server.hpp"
#include "gestura/tensor_frame.hpp"
#include "gestura/training.hpp"
