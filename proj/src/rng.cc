/*
 * Copyright 2026 The Fedsplit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fedsplit/rng.h"

namespace fedsplit {
namespace {

uint64_t Mix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

uint64_t DeriveSeed(uint64_t root, Purpose purpose, uint64_t t, uint64_t k,
                    uint64_t slot) {
  uint64_t h = Mix(root);
  h = Mix(h ^ static_cast<uint64_t>(purpose));
  h = Mix(h ^ t);
  h = Mix(h ^ (k + 0x632be59bd9b4e019ULL));
  h = Mix(h ^ (slot + 0x8cb92ba72f3d8dd7ULL));
  return h;
}

}  // namespace fedsplit
