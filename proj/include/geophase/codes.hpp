#pragma once

// Bosonic logical encodings in a single cavity and the ideal encode/decode
// maps between a qubit and the code space.

#include "geophase/fock.hpp"

#include <string>
#include <vector>

namespace geophase {

enum class CatVariant { symmetric, shifted };

struct Encoding {
  std::string name;
  ModeSpec cavity;
  Ket zero; // |0>_L as defined by the code (normalized)
  Ket one;  // |1>_L
  cplx overlap; // <0_L|1_L>

  // Orthonormal code basis used by the encode/decode maps: |1>_L is kept and
  // |0>_L is Gram–Schmidt orthogonalized against it. Identical to (zero, one)
  // for orthogonal codes.
  Ket code_zero() const;
  const Ket &code_one() const { return one; }
};

// symmetric: {|alpha>, |-alpha>}; shifted: {|2 alpha>, |0>}. The kets are
// D(beta)|0> with the truncated-generator exponential. Warns if the overlap
// magnitude is >= 0.05 and throws when the two kets are (numerically) equal.
Encoding cat_encoding(cplx alpha, int dim, CatVariant variant);
// {(|0> + |4>)/sqrt 2, |2>}; dim >= 5.
Encoding binomial_encoding(int dim);

// Normalized c0|0>_L + c1|1>_L (Gram normalization for non-orthogonal bases).
Ket logical_ket(const Encoding &enc, cplx c0, cplx c1);
// Normalized c0|0~>_L + c1|1>_L in the orthonormal code basis.
Ket code_ket(const Encoding &enc, cplx c0, cplx c1);

// Unitary on qubit (x) cavity with (c0|g> + c1|e>)|0> -> |g>(c0|0~>_L + c1|1>_L),
// completed by Gram–Schmidt over the remaining basis in lexicographic order.
LinearOp ideal_encoder(const Encoding &enc);

// Free evolution of an undriven cavity under -(K/2) a^dag a^dag a a:
// exp(+i (K/2) a^dag a^dag a a T).
LinearOp kerr_free_evolution(const ModeSpec &cavity, double kerr, double duration);

// Decoder that first undoes a known cavity evolution W and then inverts the
// encoder: U_enc^dag (I (x) W^dag).
LinearOp compensated_decoder(const Encoding &enc, const LinearOp &cavity_evolution);
// W = kerr_free_evolution(K, T).
LinearOp kerr_corrected_decoder(const Encoding &enc, double kerr, double duration);

// Unitary whose columns at `positions` are the given orthonormal columns; the
// other columns come from Gram–Schmidt over the standard basis in order.
CMat complete_unitary(const CMat &fixed_columns, const std::vector<Eigen::Index> &positions);

} // namespace geophase
