#pragma once

#include <iosfwd>
#include <string>

#include "qleak/channel.hpp"
#include "qleak/state.hpp"

namespace qleak {

// Matrix text format: line 1 "rows cols", then rows*cols lines "re im" in
// row-major order. '#' starts a comment line. Locale-independent (dot
// decimal separator), written with shortest round-trip precision.
void write_matrix(std::ostream& os, const ComplexMatrix& m);
ComplexMatrix read_matrix(std::istream& is);

// State file: "layout <label>:<dim>:<c|q> ..." header line, then the matrix.
void write_state(std::ostream& os, const DensityOperator& rho);
DensityOperator read_state(std::istream& is);

// Kraus file: line 1 "k in_dim out_dim", then k matrices in the matrix text
// format.
void write_kraus(std::ostream& os, const KrausChannel& ch);
KrausChannel read_kraus(std::istream& is);

// Whole-file helpers.
ComplexMatrix load_matrix(const std::string& path);
void save_matrix(const std::string& path, const ComplexMatrix& m);
DensityOperator load_state(const std::string& path);
void save_state(const std::string& path, const DensityOperator& rho);
KrausChannel load_kraus(const std::string& path);
void save_kraus(const std::string& path, const KrausChannel& ch);

std::string read_text_file(const std::string& path);

}  // namespace qleak
