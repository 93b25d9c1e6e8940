#pragma once

// The differentiable modules (diffcore, fsq, generator) are built twice: in
// 32-bit floats for training and inference, and in 64-bit floats for
// finite-difference gradient checks. Each build lives in its own inline
// namespace so both can be linked into one binary.
#if defined(MOTIONKIT_SCALAR_DOUBLE)
#define MOTIONKIT_PRECISION f64
#else
#define MOTIONKIT_PRECISION f32
#endif
