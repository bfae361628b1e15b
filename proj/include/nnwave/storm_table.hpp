#ifndef NNWAVE_STORM_TABLE_HPP
#define NNWAVE_STORM_TABLE_HPP

namespace nnwave {

// The bundled 645-storm synthetic catalog as CSV text.
const char* bundled_storm_table();

}  // namespace nnwave

#endif
