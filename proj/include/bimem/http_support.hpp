#pragma once
// Single include point for cpp-httplib so the OpenSSL toggle is identical in
// every translation unit.

#if defined(BIMEM_WITH_OPENSSL)
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif

#include <httplib.h>
