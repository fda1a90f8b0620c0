#include "geophase/diagnostics.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace geophase {
namespace {

std::mutex &handler_mutex() {
  static std::mutex m;
  return m;
}

WarningHandler &handler() {
  static WarningHandler h = [](std::string_view msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return h;
}

} // namespace

void warn(std::string_view message) {
  std::lock_guard<std::mutex> lock(handler_mutex());
  if (handler())
    handler()(message);
}

WarningHandler set_warning_handler(WarningHandler h) {
  std::lock_guard<std::mutex> lock(handler_mutex());
  return std::exchange(handler(), std::move(h));
}

} // namespace geophase
