/*
 * Copyright 2026 The rmamba Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Exits 0 when every pixel of the image is 0 or 255 and its size matches
// the expected width and height.
#include <cstdlib>
#include <iostream>
#include <string>

#include "rmamba/data.hpp"

int main(int argc, char** argv) {
  if (argc != 4) {
    std::cerr << "usage: mask_probe <image> <width> <height>\n";
    return 2;
  }
  try {
    const rmamba::Image8 img = rmamba::read_image(argv[1]);
    if (img.width != std::stol(argv[2]) || img.height != std::stol(argv[3])) {
      std::cerr << "size " << img.width << "x" << img.height << "\n";
      return 1;
    }
    long fg = 0;
    for (auto v : img.pixels) {
      if (v != 0 && v != 255) {
        std::cerr << "non-binary value " << int(v) << "\n";
        return 1;
      }
      fg += v == 255;
    }
    std::cout << "binary mask, " << fg << " foreground pixels\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
}
