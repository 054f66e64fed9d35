#pragma once

// Every httplib include goes through here so the settings below apply
// everywhere. The stock listen backlog of 5 drops bursts of connections,
// which then sit out a 1 s SYN retransmit.

#ifndef CPPHTTPLIB_LISTEN_BACKLOG
#define CPPHTTPLIB_LISTEN_BACKLOG 256
#endif

#include "httplib.h"
