// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "instcap/amc.hpp"
#include "instcap/blur.hpp"
#include "instcap/camera_label.hpp"
#include "instcap/caption_schema.hpp"
#include "instcap/chat.hpp"
#include "instcap/concurrency.hpp"
#include "instcap/conversation.hpp"
#include "instcap/dataset.hpp"
#include "instcap/enhancer.hpp"
#include "instcap/error.hpp"
#include "instcap/flow.hpp"
#include "instcap/http_client.hpp"
#include "instcap/image.hpp"
#include "instcap/inseval.hpp"
#include "instcap/metrics.hpp"
#include "instcap/mock_server.hpp"
#include "instcap/model_adapter.hpp"
#include "instcap/orchestrator.hpp"
#include "instcap/pipeline.hpp"
#include "instcap/png_io.hpp"
#include "instcap/prompt_pack.hpp"
#include "instcap/run_config.hpp"
#include "instcap/tensor.hpp"
#include "instcap/temporal_metadata.hpp"
#include "instcap/text.hpp"
#include "instcap/video_ingest.hpp"
