#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pcl {

// How encryption keys pair with decryption keys.
//   Split:         symmetric keys invert to themselves, pk(A)/sk(A) invert
//                  to each other.
//   SymmetricOnly: every key inverts to itself.
//   AsymmetricOnly: only pk/sk pairs invert; symmetric keys cannot be
//                  used for decryption at all.
enum class KeyScheme : std::uint8_t { Split, SymmetricOnly, AsymmetricOnly };

const char* key_scheme_name(KeyScheme s);
KeyScheme key_scheme_from_name(const std::string& s);

// Semantic toggles shared by the term algebra, the execution engine and
// the formula evaluator.
struct SemanticsConfig {
  bool typed = true;            // variables match only their declared sort
  bool dh_theory = false;       // h(a,b) = h(b,a) at the term level
  KeyScheme keys = KeyScheme::Split;
  bool sig_reveals_payload = true;  // anyone can read a signature's payload
  bool precedence_rule = false;     // honesty-mode checks prepend the role prefix
};

// Search limits for bounded run enumeration.
struct Bounds {
  int max_threads_per_role = 2;
  int max_run_length = 14;      // events per run
  int max_intruder_depth = 4;   // constructor applications when composing

  void validate() const {
    if (max_threads_per_role < 1 || max_run_length < 1 || max_intruder_depth < 1)
      throw std::invalid_argument("bounds must all be >= 1");
  }
};

}  // namespace pcl
