/*
 * Copyright 2026 The greedlab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Adversarial objectives, all written as quantities to minimize.
//
// Vanilla discriminator:  -[mean log D(x) + mean log(1 - D(G(z))) + R]
// Vanilla generator:      -mean log D(G(z))            (non-saturating form)
// Wasserstein critic:     -[mean f(x) - mean f(G(z)) + R]
// Wasserstein generator:  -mean f(G(z))
//
// Probability inputs must already be clamped to [kProbFloor, kProbCeil];
// mlp_forward does that for sigmoid heads.

#include "greedlab/autodiff.hpp"

namespace greedlab {

inline Var d_loss_vanilla(Var d_real, Var d_fake, Var r_term) {
  return neg(add(add(mean(log(d_real)), mean(log(one_minus(d_fake)))), r_term));
}

inline Var d_loss_vanilla(Var d_real, Var d_fake) {
  return neg(add(mean(log(d_real)), mean(log(one_minus(d_fake)))));
}

inline Var g_loss_vanilla(Var d_fake) { return neg(mean(log(d_fake))); }

inline Var d_loss_wgan(Var critic_real, Var critic_fake, Var r_term) {
  return neg(add(sub(mean(critic_real), mean(critic_fake)), r_term));
}

inline Var d_loss_wgan(Var critic_real, Var critic_fake) {
  return neg(sub(mean(critic_real), mean(critic_fake)));
}

inline Var g_loss_wgan(Var critic_fake) { return neg(mean(critic_fake)); }

}  // namespace greedlab
