#pragma once

#include <iosfwd>
#include <string>

#include "feddr/trace.hpp"

namespace feddr {

// Line-delimited JSON: a header line, one line per record (fields in a fixed
// order, doubles with 17 significant digits) and, when the run stopped early,
// a closing abort line. States are written only when the trace carries them.
void write_trace(std::ostream& out, const Trace& trace);
std::string trace_to_string(const Trace& trace);
void save_trace(const std::string& path, const Trace& trace);

Trace read_trace(std::istream& in);
Trace load_trace(const std::string& path);

}  // namespace feddr
