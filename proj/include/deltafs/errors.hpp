#pragma once

#include <stdexcept>
#include <string>

namespace deltafs {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// block_device
struct DeviceFull : Error { using Error::Error; };
struct InvalidRead : Error { using Error::Error; };
struct InvalidState : Error { using Error::Error; };
struct NothingToClean : Error { using Error::Error; };

// page_cache
struct CachePressure : Error { using Error::Error; };

// delta_codec
struct CorruptDelta : Error { using Error::Error; };

// inline_store
struct OversizeDelta : Error { using Error::Error; };
struct CorruptInode : Error { using Error::Error; };

// dcm_store
struct CorruptMapping : Error { using Error::Error; };
struct MetaFull : Error { using Error::Error; };

// lfs_core
struct Exists : Error { using Error::Error; };
struct NotFound : Error { using Error::Error; };
struct OutOfRange : Error { using Error::Error; };

// hotness
struct EmptyInput : Error { using Error::Error; };

// harness
struct TraceParse : Error { using Error::Error; };

}  // namespace deltafs
