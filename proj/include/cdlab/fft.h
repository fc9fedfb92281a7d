/*
 * Copyright 2026 The cdlab Authors.
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

#ifndef CDLAB_FFT_H_
#define CDLAB_FFT_H_

#include <complex>
#include <span>

namespace cdlab {

// In-place DFT. Radix-2 for power-of-two lengths, direct summation otherwise.
// The forward transform uses exp(-2 pi i k n / N) and no scaling; the inverse
// uses exp(+2 pi i k n / N) and scales by 1/N when `normalize` is set.
void FftInPlace(std::span<std::complex<double>> data, bool inverse,
                bool normalize);

bool IsPowerOfTwo(long n);

}  // namespace cdlab

#endif  // CDLAB_FFT_H_
