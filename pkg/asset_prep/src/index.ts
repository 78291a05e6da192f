export * from './ids.js'
export * from './encoders.js'
export * from './captioners.js'
export * from './formats.js'
export * from './export.js'
